"""Factor sweeps over the adaptation config, with a stable CSV boundary.

The CSV schema is the external reporting interface:
factor,value,top1_zero_shot,top1_adapted,mean_episode_time_ms
Numbers are written with str() (decimal point, no locale, no padding).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

from .errors import InvalidArgument
from .pipeline import AdaptConfig, RunSummary, run_stream
from .policy import EmbeddingTable, SampleViews

CSV_HEADER = ("factor", "value", "top1_zero_shot", "top1_adapted", "mean_episode_time_ms")

# CSV/interface factor names -> AdaptConfig fields
_FACTORS = {"lambda": "disp_weight", "k": "top_k", "steps": "tta_steps"}


@dataclass(frozen=True)
class AblationGrid:
    """Values to sweep; empty tuples skip a factor entirely."""

    lambda_values: tuple[float, ...] = ()
    k_values: tuple[int, ...] = ()
    step_values: tuple[int, ...] = ()
    one_factor_at_a_time: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lambda_values", tuple(float(v) for v in self.lambda_values))
        object.__setattr__(self, "k_values", tuple(int(v) for v in self.k_values))
        object.__setattr__(self, "step_values", tuple(int(v) for v in self.step_values))
        if not (self.lambda_values or self.k_values or self.step_values):
            raise InvalidArgument("ablation grid is empty: give at least one factor a value")
        if any(v < 0.0 for v in self.lambda_values):
            raise InvalidArgument(f"lambda values must be >= 0, got {self.lambda_values}")
        if any(k < 2 for k in self.k_values):
            raise InvalidArgument(f"k values must be >= 2, got {self.k_values}")
        if any(s < 1 for s in self.step_values):
            raise InvalidArgument(f"step values must be >= 1, got {self.step_values}")

    def factors(self) -> list[tuple[str, tuple]]:
        pairs = [
            ("lambda", self.lambda_values),
            ("k", self.k_values),
            ("steps", self.step_values),
        ]
        return [(name, values) for name, values in pairs if values]


@dataclass
class AblationRow:
    """One sweep point; the full summary stays attached for deeper checks."""

    factor: str
    value: str
    top1_zero_shot: float | None
    top1_adapted: float | None
    mean_episode_time_ms: float
    summary: RunSummary


def _mean_time_ms(summary: RunSummary) -> float:
    if not summary.episodes:
        return 0.0
    return sum(e.wall_time_ms for e in summary.episodes) / len(summary.episodes)


def _row(factor: str, value: str, summary: RunSummary) -> AblationRow:
    return AblationRow(
        factor=factor,
        value=value,
        top1_zero_shot=summary.top1_zero_shot,
        top1_adapted=summary.top1_adapted,
        mean_episode_time_ms=_mean_time_ms(summary),
        summary=summary,
    )


def run_ablation(
    grid: AblationGrid,
    dataset: list[SampleViews],
    table: EmbeddingTable,
    base_cfg: AdaptConfig = AdaptConfig(),
    workers: int = 1,
) -> list[AblationRow]:
    """Sweep the grid around base_cfg, one run_stream per point.

    One-factor-at-a-time holds the other factors at the base config; the
    cartesian mode crosses every listed value and labels rows with
    slash-joined factor names and values.
    """
    for k in grid.k_values:
        if k > table.num_classes:
            raise InvalidArgument(f"k = {k} exceeds the {table.num_classes}-class table")
    rows = []
    if grid.one_factor_at_a_time:
        for name, values in grid.factors():
            for value in values:
                cfg = replace(base_cfg, **{_FACTORS[name]: value})
                rows.append(_row(name, str(value), run_stream(dataset, table, cfg, workers)))
    else:
        names = [name for name, _ in grid.factors()]
        for combo in product(*(values for _, values in grid.factors())):
            cfg = replace(
                base_cfg, **{_FACTORS[n]: v for n, v in zip(names, combo)}
            )
            rows.append(
                _row(
                    "/".join(names),
                    "/".join(str(v) for v in combo),
                    run_stream(dataset, table, cfg, workers),
                )
            )
    return rows


def _cell(value: float | None) -> str:
    return "" if value is None else str(value)


def format_ablation_csv(rows: list[AblationRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            (
                row.factor,
                row.value,
                _cell(row.top1_zero_shot),
                _cell(row.top1_adapted),
                str(row.mean_episode_time_ms),
            )
        )
    return buf.getvalue()


def write_ablation_csv(rows: list[AblationRow], path: str | Path) -> None:
    """Write the canonical CSV; column order is part of the interface."""
    Path(path).write_text(format_ablation_csv(rows))
