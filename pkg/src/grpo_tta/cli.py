"""Command-line front end: synth, zeroshot, adapt, ablate, gradcheck.

Exit codes: 0 success, 1 usage errors (unknown flags, bad values), 2 data or
format errors (missing/corrupt files, config-vs-data mismatches), 3 a failed
gradient check. Structured results go to --out (JSON, or CSV by suffix);
without --out the JSON lands on stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .ablation import AblationGrid, run_ablation, write_ablation_csv
from .errors import EngineError, FormatError, InvalidArgument
from .fileio import read_embedding_file, write_embedding_file
from .objective import gradient_check
from .pipeline import AdaptConfig, RunSummary, run_stream, zero_shot_baseline
from .synth import SynthConfig, generate_synthetic, jitter_views

WORKERS_ENV = "GRPO_TTA_WORKERS"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors by default; this CLI reserves 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_adapt_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", dest="top_k", type=int, default=4, help="candidate group size")
    p.add_argument(
        "--lambda", dest="disp_weight", type=float, default=1.0, help="dispersion reward weight"
    )
    p.add_argument(
        "--w", dest="align_scale", type=float, default=2.5, help="alignment reward scale"
    )
    p.add_argument(
        "--epsilon", dest="clip_epsilon", type=float, default=0.2, help="ratio clip half-width"
    )
    p.add_argument(
        "--keep-fraction",
        type=float,
        default=0.1,
        help="fraction of views the entropy filter keeps",
    )
    p.add_argument("--lr", dest="learning_rate", type=float, default=5e-6, help="learning rate")
    p.add_argument("--wd", dest="weight_decay", type=float, default=5e-4, help="weight decay")
    p.add_argument("--steps", dest="tta_steps", type=int, default=1, help="update steps per sample")
    p.add_argument("--seed", type=int, default=0, help="seed for any generated views")
    p.add_argument("--use-bias", action="store_true", help="give the projector a bias term")
    p.add_argument(
        "--predict-from-views",
        action="store_true",
        help="predict from the aggregated views instead of the original embedding",
    )
    p.add_argument(
        "--no-dispersion", action="store_true", help="alignment-only rewards (skip dispersion)"
    )
    p.add_argument(
        "--gen-views",
        type=int,
        default=32,
        help="views to jitter-generate when the file stores none",
    )
    p.add_argument(
        "--gen-jitter", type=float, default=0.05, help="jitter sigma for generated views"
    )


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--tau",
        dest="temperature",
        type=float,
        default=None,
        help="softmax temperature override (default: the file's value)",
    )
    p.add_argument(
        "--workers",
        type=int,
        default=None,
        help=f"parallel episodes (default: ${WORKERS_ENV} or 1); results never depend on this",
    )
    p.add_argument("--out", type=Path, default=None, help="write results here instead of stdout")


def _build_parser() -> _Parser:
    parser = _Parser(prog="grpo-tta", description=__doc__)
    parser.add_argument("--version", action="version", version=f"grpo-tta {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark file")
    p.add_argument("--out", type=Path, required=True, help="output embedding file")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--views", type=int, default=32)
    p.add_argument("--sigma-class", type=float, default=0.1, help="intra-class noise")
    p.add_argument("--sigma-view", type=float, default=0.05, help="view jitter")
    p.add_argument("--shift", type=float, default=0.35, help="distribution shift strength in [0, 1]")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--tau", dest="temperature", type=float, default=0.01)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("zeroshot", help="score the frozen classifier, no adaptation")
    p.add_argument("file", type=Path, help="embedding file")
    _add_common_flags(p)
    p.set_defaults(func=cmd_zeroshot)

    p = sub.add_parser("adapt", help="episodic test-time adaptation over a file")
    p.add_argument("file", type=Path, help="embedding file")
    _add_adapt_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("ablate", help="sweep lambda/k/steps and write a CSV (plus figures)")
    p.add_argument("file", type=Path, help="embedding file")
    p.add_argument(
        "--grid",
        default="lambda=0,0.5,1,2,4;k=2,3,4,6,8;steps=1,2,3,4,5",
        help='factor sweep, e.g. "lambda=0,1;k=2,4;steps=1,2"',
    )
    p.add_argument("--cartesian", action="store_true", help="cross factors instead of one-at-a-time")
    p.add_argument("--no-figures", action="store_true", help="skip the PNGs next to the CSV")
    _add_adapt_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradient agreement")
    p.add_argument("--cases", type=int, default=50, help="random episodes to check")
    p.add_argument("--step", type=float, default=1e-5, help="central-difference step")
    p.add_argument("--tolerance", type=float, default=1e-4, help="max relative error allowed")
    p.add_argument("--seed", type=int, default=1400, help="base seed for the episodes")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def _resolve_workers(args) -> int:
    if args.workers is not None:
        workers = args.workers
    else:
        raw = os.environ.get(WORKERS_ENV, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise InvalidArgument(f"${WORKERS_ENV} must be an integer, got {raw!r}")
    if workers < 1:
        raise InvalidArgument(f"workers must be >= 1, got {workers}")
    return workers


def _adapt_config(args) -> AdaptConfig:
    return AdaptConfig(
        top_k=args.top_k,
        disp_weight=args.disp_weight,
        align_scale=args.align_scale,
        clip_epsilon=args.clip_epsilon,
        keep_fraction=args.keep_fraction,
        temperature=args.temperature,
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
        tta_steps=args.tta_steps,
        use_bias=args.use_bias,
        seed=args.seed,
        predict_from_views=args.predict_from_views,
        disable_dispersion=args.no_dispersion,
    )


def _load_dataset(args, seed: int, gen_views: int = 32, gen_jitter: float = 0.05):
    table, samples, header = read_embedding_file(args.file)
    if header.views_per_sample == 0:
        samples = jitter_views(samples, gen_views, gen_jitter, seed)
    return table, samples


def _episode_dict(e) -> dict:
    rewards = None
    if e.rewards is not None:
        rewards = {
            "align": e.rewards.align.tolist(),
            "disp": e.rewards.disp.tolist(),
            "combined": e.rewards.combined.tolist(),
            "advantages": e.rewards.advantages.tolist(),
        }
    return {
        "sample_id": e.sample_id,
        "label": e.label,
        "zero_shot_prediction": e.zero_shot_prediction,
        "adapted_prediction": e.adapted_prediction,
        "candidate_ids": list(e.candidate_ids),
        "per_step_loss": list(e.per_step_loss),
        "selected_view_indices": list(e.selected_view_indices),
        "rewards": rewards,
        "wall_time_ms": e.wall_time_ms,
        "failed": e.failed,
    }


def summary_dict(summary: RunSummary, config: dict, adapted: bool = True) -> dict:
    """The documented JSON result shape shared by zeroshot and adapt."""
    return {
        "config": config,
        "top1_zero_shot": summary.top1_zero_shot,
        "top1_adapted": summary.top1_adapted if adapted else None,
        "episodes": [_episode_dict(e) for e in summary.episodes],
        "engine_version": __version__,
    }


def _episodes_csv(summary: RunSummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ("sample_id", "label", "zero_shot_prediction", "adapted_prediction", "failed", "wall_time_ms")
    )
    for e in summary.episodes:
        writer.writerow(
            (
                e.sample_id,
                "" if e.label is None else e.label,
                e.zero_shot_prediction,
                e.adapted_prediction,
                e.failed,
                e.wall_time_ms,
            )
        )
    return buf.getvalue()


def _emit(payload: dict, summary: RunSummary, out: Path | None) -> None:
    if out is None:
        print(json.dumps(payload, indent=2))
        return
    if out.suffix.lower() == ".csv":
        out.write_text(_episodes_csv(summary))
    else:
        out.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {out}")


def _data_error(exc: Exception, path: Path | None = None) -> int:
    where = f"{path}: " if path is not None else ""
    print(f"grpo-tta: error: {where}{exc}", file=sys.stderr)
    return 2


def cmd_synth(args) -> int:
    try:
        cfg = SynthConfig(
            dim=args.dim,
            num_classes=args.classes,
            num_samples=args.samples,
            views_per_sample=args.views,
            intra_class_noise=args.sigma_class,
            view_jitter=args.sigma_view,
            shift_strength=args.shift,
            seed=args.seed,
            temperature=args.temperature,
        )
    except InvalidArgument as exc:
        print(f"grpo-tta synth: error: {exc}", file=sys.stderr)
        return 1
    table, samples = generate_synthetic(cfg)
    try:
        write_embedding_file(args.out, table, samples)
    except OSError as exc:
        return _data_error(exc, args.out)
    print(
        f"wrote {args.out}: {cfg.num_samples} samples, {cfg.num_classes} classes, "
        f"dim {cfg.dim}, {cfg.views_per_sample} views/sample, seed {cfg.seed}"
    )
    return 0


def cmd_zeroshot(args) -> int:
    try:
        cfg = AdaptConfig(temperature=args.temperature)
        workers = _resolve_workers(args)
    except InvalidArgument as exc:
        print(f"grpo-tta zeroshot: error: {exc}", file=sys.stderr)
        return 1
    try:
        table, samples = _load_dataset(args, cfg.seed)
        summary = zero_shot_baseline(samples, table, cfg, workers)
    except (OSError, EngineError) as exc:
        return _data_error(exc, args.file)
    config = {"command": "zeroshot", "input": str(args.file), "workers": workers, **asdict(cfg)}
    _emit(summary_dict(summary, config, adapted=False), summary, args.out)
    return 0


def cmd_adapt(args) -> int:
    try:
        cfg = _adapt_config(args)
        workers = _resolve_workers(args)
    except InvalidArgument as exc:
        print(f"grpo-tta adapt: error: {exc}", file=sys.stderr)
        return 1
    try:
        table, samples = _load_dataset(args, cfg.seed, args.gen_views, args.gen_jitter)
        summary = run_stream(samples, table, cfg, workers)
    except (OSError, EngineError) as exc:
        return _data_error(exc, args.file)
    config = {"command": "adapt", "input": str(args.file), "workers": workers, **asdict(cfg)}
    _emit(summary_dict(summary, config), summary, args.out)
    return 0


def _parse_grid(spec: str, cartesian: bool) -> AblationGrid:
    values: dict[str, tuple] = {"lambda": (), "k": (), "steps": ()}
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        name, _, raw = part.partition("=")
        name = name.strip()
        if name not in values:
            raise InvalidArgument(f"unknown grid factor {name!r} (expected lambda, k, steps)")
        items = [v.strip() for v in raw.split(",") if v.strip()]
        if not items:
            raise InvalidArgument(f"grid factor {name!r} has no values")
        try:
            if name == "lambda":
                values[name] = tuple(float(v) for v in items)
            else:
                values[name] = tuple(int(v) for v in items)
        except ValueError:
            raise InvalidArgument(f"could not parse values for grid factor {name!r}: {raw!r}")
    return AblationGrid(
        lambda_values=values["lambda"],
        k_values=values["k"],
        step_values=values["steps"],
        one_factor_at_a_time=not cartesian,
    )


def cmd_ablate(args) -> int:
    try:
        cfg = _adapt_config(args)
        workers = _resolve_workers(args)
        grid = _parse_grid(args.grid, args.cartesian)
    except InvalidArgument as exc:
        print(f"grpo-tta ablate: error: {exc}", file=sys.stderr)
        return 1
    out = args.out if args.out is not None else Path("ablation.csv")
    try:
        table, samples = _load_dataset(args, cfg.seed, args.gen_views, args.gen_jitter)
        rows = run_ablation(grid, samples, table, cfg, workers)
        write_ablation_csv(rows, out)
    except (OSError, EngineError) as exc:
        return _data_error(exc, args.file)
    print(f"wrote {out} ({len(rows)} rows)")
    if not args.no_figures:
        from .report import save_ablation_figures

        for path in save_ablation_figures(rows, out.with_suffix("")):
            print(f"wrote {path}")
    return 0


def cmd_gradcheck(args) -> int:
    try:
        if args.cases < 1:
            raise InvalidArgument(f"--cases must be >= 1, got {args.cases}")
        if not args.step > 0:
            raise InvalidArgument(f"--step must be > 0, got {args.step}")
        result = gradient_check(cases=args.cases, step=args.step, base_seed=args.seed)
    except InvalidArgument as exc:
        print(f"grpo-tta gradcheck: error: {exc}", file=sys.stderr)
        return 1
    print(f"cases:            {result.cases}")
    print(f"params checked:   {result.params_checked}")
    print(f"params excluded:  {result.params_excluded} (clip-branch boundary)")
    print(f"max rel error:    {result.max_rel_error:.3e} (tolerance {args.tolerance:.1e})")
    if result.passed(args.tolerance):
        print("gradient check passed")
        return 0
    print(f"gradient check FAILED (worst seed {result.worst_seed})", file=sys.stderr)
    return 3


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
