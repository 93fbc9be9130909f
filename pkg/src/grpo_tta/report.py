"""File-only matplotlib rendering of ablation sweeps.

Figures are presentation artifacts living next to the CSV; nothing in the
engine ever reads them back. The Agg backend keeps this import-safe on
headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .ablation import AblationRow

_GOLDEN = (1 + 5**0.5) / 2


def _axis_values(rows: list[AblationRow]) -> list[float]:
    return [float(r.value) for r in rows]


def save_ablation_figures(rows: list[AblationRow], stem: str | Path) -> list[Path]:
    """One PNG per single-factor sweep: <stem>_<factor>.png.

    Rows from cartesian sweeps (slash-joined factors) and rows without
    accuracies (unlabelled data) are skipped rather than guessed at.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    by_factor: dict[str, list[AblationRow]] = {}
    for row in rows:
        if "/" in row.factor or row.top1_adapted is None or row.top1_zero_shot is None:
            continue
        by_factor.setdefault(row.factor, []).append(row)

    written = []
    for factor, factor_rows in by_factor.items():
        factor_rows = sorted(factor_rows, key=lambda r: float(r.value))
        xs = _axis_values(factor_rows)
        width = 4.8
        fig, ax = plt.subplots(figsize=(width, width / _GOLDEN))
        ax.plot(xs, [r.top1_zero_shot for r in factor_rows], "o--", label="zero-shot")
        ax.plot(xs, [r.top1_adapted for r in factor_rows], "o-", label="adapted")
        ax.set_xlabel(factor)
        ax.set_ylabel("top-1 accuracy")
        ax.set_title(f"sweep over {factor}")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = stem.parent / f"{stem.name}_{factor}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
