import csv
import io

import pytest

from grpo_tta.ablation import (
    CSV_HEADER,
    AblationGrid,
    format_ablation_csv,
    run_ablation,
    write_ablation_csv,
)
from grpo_tta.errors import InvalidArgument
from grpo_tta.pipeline import AdaptConfig, run_stream
from grpo_tta.synth import SynthConfig, generate_synthetic


@pytest.fixture(scope="module")
def bench():
    return generate_synthetic(
        SynthConfig(dim=12, num_classes=5, num_samples=10, views_per_sample=6, seed=17)
    )


def test_grid_validation():
    with pytest.raises(InvalidArgument):
        AblationGrid()
    with pytest.raises(InvalidArgument):
        AblationGrid(lambda_values=(-1.0,))
    with pytest.raises(InvalidArgument):
        AblationGrid(k_values=(1,))
    with pytest.raises(InvalidArgument):
        AblationGrid(step_values=(0,))


def test_grid_factor_order_is_fixed():
    grid = AblationGrid(step_values=(1, 2), lambda_values=(0.5,), k_values=(2,))
    assert [name for name, _ in grid.factors()] == ["lambda", "k", "steps"]


def test_single_point_matches_direct_run(bench):
    table, samples = bench
    base = AdaptConfig(top_k=3)
    rows = run_ablation(AblationGrid(lambda_values=(1.0,)), samples, table, base)
    assert len(rows) == 1
    row = rows[0]
    assert row.factor == "lambda"
    assert row.value == "1.0"
    direct = run_stream(samples, table, base)
    assert row.top1_zero_shot == direct.top1_zero_shot
    assert row.top1_adapted == direct.top1_adapted
    assert row.summary.config.disp_weight == 1.0
    assert row.summary.config.top_k == 3


def test_one_factor_at_a_time_row_count(bench):
    table, samples = bench
    grid = AblationGrid(lambda_values=(0.0, 1.0), k_values=(2, 3, 4), step_values=(1,))
    rows = run_ablation(grid, samples, table, AdaptConfig())
    assert len(rows) == 6
    assert [r.factor for r in rows] == ["lambda", "lambda", "k", "k", "k", "steps"]
    # swept values land in the config, everything else stays at base
    k_rows = [r for r in rows if r.factor == "k"]
    assert [r.summary.config.top_k for r in k_rows] == [2, 3, 4]
    assert all(r.summary.config.disp_weight == 1.0 for r in k_rows)


def test_cartesian_rows(bench):
    table, samples = bench
    grid = AblationGrid(
        lambda_values=(0.0, 2.0), step_values=(1, 2), one_factor_at_a_time=False
    )
    rows = run_ablation(grid, samples, table, AdaptConfig())
    assert len(rows) == 4
    assert all(r.factor == "lambda/steps" for r in rows)
    assert [r.value for r in rows] == ["0.0/1", "0.0/2", "2.0/1", "2.0/2"]
    assert rows[3].summary.config.disp_weight == 2.0
    assert rows[3].summary.config.tta_steps == 2


def test_lambda_zero_equals_dispersion_disabled(bench):
    table, samples = bench
    rows = run_ablation(AblationGrid(lambda_values=(0.0,)), samples, table, AdaptConfig())
    plain = run_stream(samples, table, AdaptConfig(disable_dispersion=True))
    swept = rows[0].summary
    for a, b in zip(swept.episodes, plain.episodes):
        assert a.adapted_prediction == b.adapted_prediction
        assert a.per_step_loss == b.per_step_loss
        assert (a.rewards.combined == b.rewards.combined).all()


def test_k_beyond_class_count_rejected(bench):
    table, samples = bench
    with pytest.raises(InvalidArgument, match="5-class"):
        run_ablation(AblationGrid(k_values=(6,)), samples, table, AdaptConfig())


def test_csv_header_is_exact(bench):
    table, samples = bench
    rows = run_ablation(AblationGrid(step_values=(1,)), samples, table, AdaptConfig())
    text = format_ablation_csv(rows)
    first = text.splitlines()[0]
    assert first == "factor,value,top1_zero_shot,top1_adapted,mean_episode_time_ms"
    assert first == ",".join(CSV_HEADER)


def test_csv_parses_back(bench):
    table, samples = bench
    grid = AblationGrid(lambda_values=(0.0, 1.0))
    rows = run_ablation(grid, samples, table, AdaptConfig())
    parsed = list(csv.DictReader(io.StringIO(format_ablation_csv(rows))))
    assert len(parsed) == 2
    for got, row in zip(parsed, rows):
        assert got["factor"] == "lambda"
        assert float(got["value"]) == float(row.value)
        assert float(got["top1_zero_shot"]) == row.top1_zero_shot
        assert float(got["top1_adapted"]) == row.top1_adapted
        assert float(got["mean_episode_time_ms"]) >= 0.0


def test_csv_blank_cells_for_unlabelled(bench):
    import dataclasses

    table, samples = bench
    stripped = [dataclasses.replace(s, label=None) for s in samples]
    rows = run_ablation(AblationGrid(step_values=(1,)), stripped, table, AdaptConfig())
    parsed = list(csv.DictReader(io.StringIO(format_ablation_csv(rows))))
    assert parsed[0]["top1_zero_shot"] == ""
    assert parsed[0]["top1_adapted"] == ""


def test_write_csv_round_trip(tmp_path, bench):
    table, samples = bench
    rows = run_ablation(AblationGrid(k_values=(2, 3)), samples, table, AdaptConfig())
    path = tmp_path / "sweep.csv"
    write_ablation_csv(rows, path)
    assert path.read_bytes() == format_ablation_csv(rows).encode()
    assert path.read_bytes().count(b"\r") == 0
