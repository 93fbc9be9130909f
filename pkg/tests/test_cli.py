import csv
import io
import json

import pytest

from grpo_tta import __version__
from grpo_tta.cli import _build_parser, main


@pytest.fixture()
def bench_file(tmp_path, capsys):
    path = tmp_path / "bench.gteb"
    code = main(
        [
            "synth",
            "--out",
            str(path),
            "--dim",
            "12",
            "--classes",
            "5",
            "--samples",
            "12",
            "--views",
            "6",
            "--seed",
            "3",
        ]
    )
    assert code == 0
    capsys.readouterr()
    return path


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    assert code == 0, out
    return json.loads(out)


# --- exit codes ----------------------------------------------------------------------


def test_unknown_flag_exits_one(bench_file, capsys):
    assert main(["adapt", str(bench_file), "--bogus"]) == 1


def test_missing_subcommand_exits_one(capsys):
    assert main([]) == 1


def test_missing_file_exits_two(tmp_path, capsys):
    assert main(["zeroshot", str(tmp_path / "nope.gteb")]) == 2
    err = capsys.readouterr().err
    assert "nope.gteb" in err


def test_corrupt_file_exits_two(tmp_path, capsys):
    path = tmp_path / "garbage.gteb"
    path.write_bytes(b"XTEB1" + b"\x00" * 40)
    assert main(["adapt", str(path)]) == 2
    err = capsys.readouterr().err
    assert "magic" in err


def test_bad_synth_config_exits_one(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "x.gteb"), "--dim", "1"]) == 1


def test_bad_adapt_value_exits_one(bench_file, capsys):
    assert main(["adapt", str(bench_file), "--k", "1"]) == 1
    assert main(["adapt", str(bench_file), "--lr", "-1"]) == 1


def test_k_beyond_classes_exits_two(bench_file, capsys):
    # the config is well-formed on its own; the mismatch is against the data
    assert main(["adapt", str(bench_file), "--k", "9"]) == 2


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


# --- defaults ------------------------------------------------------------------------


def test_adapt_defaults_match_reference_setup():
    args = _build_parser().parse_args(["adapt", "file.gteb"])
    assert args.top_k == 4
    assert args.disp_weight == 1.0
    assert args.align_scale == 2.5
    assert args.clip_epsilon == 0.2
    assert args.keep_fraction == 0.1
    assert args.learning_rate == 5e-6
    assert args.weight_decay == 5e-4
    assert args.tta_steps == 1
    assert args.seed == 0
    assert args.temperature is None
    assert args.gen_views == 32
    assert args.gen_jitter == 0.05
    assert args.use_bias is False
    assert args.predict_from_views is False
    assert args.no_dispersion is False


def test_synth_defaults_match_reference_benchmark():
    args = _build_parser().parse_args(["synth", "--out", "x.gteb"])
    assert args.dim == 64
    assert args.classes == 20
    assert args.samples == 500
    assert args.views == 32
    assert args.sigma_class == 0.1
    assert args.sigma_view == 0.05
    assert args.shift == 0.35
    assert args.seed == 7
    assert args.temperature == 0.01


# --- result payloads -------------------------------------------------------------------


def test_zeroshot_payload_shape(bench_file, capsys):
    payload = run_json(capsys, ["zeroshot", str(bench_file)])
    assert set(payload) == {
        "config",
        "top1_zero_shot",
        "top1_adapted",
        "episodes",
        "engine_version",
    }
    assert payload["engine_version"] == __version__
    assert payload["top1_adapted"] is None
    assert 0.0 <= payload["top1_zero_shot"] <= 1.0
    assert len(payload["episodes"]) == 12
    assert payload["config"]["command"] == "zeroshot"


def test_adapt_payload_shape(bench_file, capsys):
    payload = run_json(capsys, ["adapt", str(bench_file), "--steps", "2"])
    assert payload["config"]["command"] == "adapt"
    assert payload["config"]["tta_steps"] == 2
    assert 0.0 <= payload["top1_adapted"] <= 1.0
    episode = payload["episodes"][0]
    assert set(episode) == {
        "sample_id",
        "label",
        "zero_shot_prediction",
        "adapted_prediction",
        "candidate_ids",
        "per_step_loss",
        "selected_view_indices",
        "rewards",
        "wall_time_ms",
        "failed",
    }
    assert len(episode["per_step_loss"]) == 2
    assert len(episode["rewards"]["advantages"]) == len(episode["candidate_ids"])


def test_zero_lr_adapt_equals_zeroshot(bench_file, capsys):
    adapt = run_json(
        capsys, ["adapt", str(bench_file), "--lr", "0", "--wd", "0"]
    )
    zero = run_json(capsys, ["zeroshot", str(bench_file)])
    assert adapt["top1_adapted"] == zero["top1_zero_shot"]
    for a, z in zip(adapt["episodes"], zero["episodes"]):
        assert a["adapted_prediction"] == z["zero_shot_prediction"]


def test_out_json_file(bench_file, tmp_path, capsys):
    out = tmp_path / "result.json"
    assert main(["zeroshot", str(bench_file), "--out", str(out)]) == 0
    assert f"wrote {out}" in capsys.readouterr().out
    payload = json.loads(out.read_text())
    assert payload["engine_version"] == __version__


def test_out_csv_file(bench_file, tmp_path, capsys):
    out = tmp_path / "episodes.csv"
    assert main(["adapt", str(bench_file), "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 12
    assert set(rows[0]) == {
        "sample_id",
        "label",
        "zero_shot_prediction",
        "adapted_prediction",
        "failed",
        "wall_time_ms",
    }


# --- workers resolution ------------------------------------------------------------------


def test_workers_env_variable(bench_file, capsys, monkeypatch):
    monkeypatch.setenv("GRPO_TTA_WORKERS", "3")
    payload = run_json(capsys, ["zeroshot", str(bench_file)])
    assert payload["config"]["workers"] == 3


def test_workers_flag_beats_env(bench_file, capsys, monkeypatch):
    monkeypatch.setenv("GRPO_TTA_WORKERS", "3")
    payload = run_json(capsys, ["zeroshot", str(bench_file), "--workers", "2"])
    assert payload["config"]["workers"] == 2


def test_workers_env_invalid(bench_file, capsys, monkeypatch):
    monkeypatch.setenv("GRPO_TTA_WORKERS", "many")
    assert main(["zeroshot", str(bench_file)]) == 1


def test_worker_count_leaves_results_alone(bench_file, capsys):
    solo = run_json(capsys, ["adapt", str(bench_file), "--workers", "1"])
    quad = run_json(capsys, ["adapt", str(bench_file), "--workers", "4"])
    for a, b in zip(solo["episodes"], quad["episodes"]):
        assert a["adapted_prediction"] == b["adapted_prediction"]
        assert a["per_step_loss"] == b["per_step_loss"]
        assert a["rewards"] == b["rewards"]


# --- view generation for originals-only files ---------------------------------------------


def test_adapt_generates_views_when_file_has_none(tmp_path, capsys):
    path = tmp_path / "bare.gteb"
    assert (
        main(
            [
                "synth",
                "--out",
                str(path),
                "--dim",
                "12",
                "--classes",
                "5",
                "--samples",
                "6",
                "--views",
                "0",
            ]
        )
        == 0
    )
    capsys.readouterr()
    payload = run_json(capsys, ["adapt", str(path), "--gen-views", "8"])
    episode = payload["episodes"][0]
    assert not episode["failed"]
    # ceil(0.1 * 8) = 1 view survives the default keep fraction
    assert len(episode["selected_view_indices"]) == 1
    assert all(i < 8 for i in episode["selected_view_indices"])


# --- ablate ---------------------------------------------------------------------------


def test_ablate_writes_csv_and_figures(bench_file, tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = main(["ablate", str(bench_file), "--grid", "lambda=0,1;k=2,3"])
    out = capsys.readouterr().out
    assert code == 0
    csv_path = tmp_path / "ablation.csv"
    assert csv_path.exists()
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "factor,value,top1_zero_shot,top1_adapted,mean_episode_time_ms"
    assert len(lines) == 5
    assert (tmp_path / "ablation_lambda.png").exists()
    assert (tmp_path / "ablation_k.png").exists()
    assert "ablation.csv" in out


def test_ablate_no_figures(bench_file, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main(
        ["ablate", str(bench_file), "--grid", "steps=1,2", "--no-figures", "--out", str(out)]
    )
    assert code == 0
    assert out.exists()
    assert list(tmp_path.glob("*.png")) == []


def test_ablate_cartesian_value_labels(bench_file, tmp_path, capsys):
    out = tmp_path / "cart.csv"
    code = main(
        [
            "ablate",
            str(bench_file),
            "--grid",
            "lambda=0,1;steps=1,2",
            "--cartesian",
            "--no-figures",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [r["factor"] for r in rows] == ["lambda/steps"] * 4
    assert [r["value"] for r in rows] == ["0.0/1", "0.0/2", "1.0/1", "1.0/2"]


def test_ablate_rejects_unknown_factor(bench_file, capsys):
    assert main(["ablate", str(bench_file), "--grid", "gamma=1"]) == 1
    assert "gamma" in capsys.readouterr().err


def test_ablate_rejects_empty_factor(bench_file, capsys):
    assert main(["ablate", str(bench_file), "--grid", "lambda="]) == 1


# --- gradcheck -------------------------------------------------------------------------


def test_gradcheck_passes(capsys):
    assert main(["gradcheck", "--cases", "4"]) == 0
    out = capsys.readouterr().out
    assert "gradient check passed" in out
    assert "max rel error" in out


def test_gradcheck_bad_cases_exits_one(capsys):
    assert main(["gradcheck", "--cases", "0"]) == 1


def test_gradcheck_impossible_tolerance_exits_three(capsys):
    assert main(["gradcheck", "--cases", "4", "--tolerance", "1e-18"]) == 3
    assert "FAILED" in capsys.readouterr().err
