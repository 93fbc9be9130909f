import pytest

from grpo_tta.ablation import AblationGrid, AblationRow, run_ablation
from grpo_tta.pipeline import AdaptConfig, RunSummary
from grpo_tta.report import save_ablation_figures
from grpo_tta.synth import SynthConfig, generate_synthetic


@pytest.fixture(scope="module")
def rows():
    table, samples = generate_synthetic(
        SynthConfig(dim=10, num_classes=4, num_samples=8, views_per_sample=4, seed=29)
    )
    grid = AblationGrid(lambda_values=(0.0, 1.0), k_values=(2, 3))
    return run_ablation(grid, samples, table, AdaptConfig())


def fake_row(factor, value, zero=0.5, adapted=0.6):
    return AblationRow(
        factor=factor,
        value=value,
        top1_zero_shot=zero,
        top1_adapted=adapted,
        mean_episode_time_ms=1.0,
        summary=RunSummary(),
    )


def test_one_png_per_factor(tmp_path, rows):
    written = save_ablation_figures(rows, tmp_path / "sweep")
    names = sorted(p.name for p in written)
    assert names == ["sweep_k.png", "sweep_lambda.png"]
    for path in written:
        data = path.read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(data) > 1000


def test_unlabelled_rows_are_skipped(tmp_path):
    rows = [fake_row("lambda", "1.0", zero=None, adapted=None)]
    assert save_ablation_figures(rows, tmp_path / "fig") == []
    assert list(tmp_path.glob("*.png")) == []


def test_cartesian_rows_are_skipped(tmp_path):
    rows = [fake_row("lambda/steps", "1.0/2")]
    assert save_ablation_figures(rows, tmp_path / "fig") == []


def test_mixed_rows_render_only_plain_factors(tmp_path):
    rows = [
        fake_row("lambda", "0.0"),
        fake_row("lambda", "1.0"),
        fake_row("lambda/steps", "1.0/2"),
    ]
    written = save_ablation_figures(rows, tmp_path / "fig")
    assert [p.name for p in written] == ["fig_lambda.png"]


def test_stem_directory_is_created(tmp_path, rows):
    nested = tmp_path / "deep" / "down" / "sweep"
    written = save_ablation_figures(rows[:2], nested)
    assert all(p.exists() for p in written)
    assert all(p.parent == nested.parent for p in written)
