"""Per-candidate rewards and group-standardized advantages.

Rewards are computed once per episode under the frozen starting parameters and
treated as constants afterwards; no gradient ever flows through them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .numerics import as_matrix, as_vector
from .policy import CandidateGroup, EmbeddingTable, ProjectorParams, project_rows

ADVANTAGE_STD_FLOOR = 1e-8


def alignment_rewards(
    original_projected,
    table: EmbeddingTable,
    group: CandidateGroup,
    align_scale: float = 2.5,
) -> np.ndarray:
    """align_scale * max(cos(t_c, h_orig), 0) per candidate, in [0, align_scale].

    Uses the projected ORIGINAL image embedding, not the augmented views; crops
    can cut away the object, and anchoring on the full image is what keeps the
    reward honest about the actual sample.
    """
    if not (align_scale > 0.0 and np.isfinite(align_scale)):
        raise InvalidArgument(f"align_scale must be finite and > 0, got {align_scale}")
    h = as_vector(original_projected)
    if h.size != table.dim:
        raise InvalidArgument(f"embedding dim {h.size} does not match table dim {table.dim}")
    if max(group.class_ids) >= table.num_classes:
        raise InvalidArgument("candidate id out of range")
    cos = np.clip(table.text_unit[list(group.class_ids)] @ h, -1.0, 1.0)
    return align_scale * np.maximum(cos, 0.0)


def sim_matrix(
    views: np.ndarray,
    params: ProjectorParams,
    table: EmbeddingTable,
    group: CandidateGroup,
) -> np.ndarray:
    """B x K cosine matrix: selected view j against candidate text embedding i."""
    m = as_matrix(views)
    if m.shape[0] < 1:
        raise InvalidArgument("similarity matrix needs at least one view")
    if max(group.class_ids) >= table.num_classes:
        raise InvalidArgument("candidate id out of range")
    projected = project_rows(m, params)
    return np.clip(projected @ table.text_unit[list(group.class_ids)].T, -1.0, 1.0)


def dispersion_rewards(sim: np.ndarray) -> np.ndarray:
    """Mean absolute deviation of each candidate column from its row means.

    Row j contributes |sim[j, i] - mean_i sim[j, :]|; averaging over rows (the
    views) gives one nonnegative reward per candidate. A single-candidate
    group always scores zero.
    """
    s = as_matrix(sim)
    if s.shape[0] < 1 or s.shape[1] < 1:
        raise InvalidArgument(f"similarity matrix must be nonempty, got shape {s.shape}")
    row_means = s.mean(axis=1, keepdims=True)
    return np.abs(s - row_means).mean(axis=0)


def combine_rewards(align: np.ndarray, disp: np.ndarray, disp_weight: float = 1.0) -> np.ndarray:
    """align + disp_weight * disp, elementwise."""
    a = as_vector(align)
    d = as_vector(disp)
    if a.size != d.size:
        raise InvalidArgument(f"reward length mismatch: {a.size} vs {d.size}")
    if not (disp_weight >= 0.0 and np.isfinite(disp_weight)):
        raise InvalidArgument(f"disp_weight must be finite and >= 0, got {disp_weight}")
    return a + disp_weight * d


def advantages(rewards) -> np.ndarray:
    """Group-standardized rewards: (r - mean) / population std.

    The population std (divide by G, not G-1) keeps the output invariant to
    positive affine reward transforms. Near-constant groups (std below
    ADVANTAGE_STD_FLOOR) return all zeros: no preference, no update.
    """
    r = as_vector(rewards)
    if r.size < 2:
        raise InvalidArgument(f"need at least 2 rewards to standardize, got {r.size}")
    mean = float(r.mean())
    std = float(np.sqrt(np.mean((r - mean) ** 2)))
    if std < ADVANTAGE_STD_FLOOR:
        return np.zeros_like(r)
    return (r - mean) / std


@dataclass
class RewardBundle:
    """Everything the objective needs to know about one episode's rewards."""

    align: np.ndarray
    disp: np.ndarray
    combined: np.ndarray
    advantages: np.ndarray
    align_scale: float
    disp_weight: float

    def __post_init__(self):
        self.align = as_vector(self.align)
        self.disp = as_vector(self.disp)
        self.combined = as_vector(self.combined)
        self.advantages = as_vector(self.advantages)
        sizes = {self.align.size, self.disp.size, self.combined.size, self.advantages.size}
        if len(sizes) != 1:
            raise InvalidArgument(f"reward component length mismatch: {sizes}")
        recombined = self.align + self.disp_weight * self.disp
        if float(np.abs(self.combined - recombined).max()) > 1e-12:
            raise InvalidArgument("combined rewards do not equal align + disp_weight * disp")


def compute_rewards(
    original_projected,
    views: np.ndarray,
    params: ProjectorParams,
    table: EmbeddingTable,
    group: CandidateGroup,
    align_scale: float = 2.5,
    disp_weight: float = 1.0,
    disable_dispersion: bool = False,
) -> RewardBundle:
    """Full reward pass for one episode under one fixed set of params.

    disable_dispersion skips the similarity matrix entirely (alignment-only
    variant); the result is bitwise identical to disp_weight = 0.
    """
    align = alignment_rewards(original_projected, table, group, align_scale)
    if disable_dispersion:
        disp = np.zeros_like(align)
    else:
        disp = dispersion_rewards(sim_matrix(views, params, table, group))
    combined = combine_rewards(align, disp, disp_weight)
    return RewardBundle(
        align=align,
        disp=disp,
        combined=combined,
        advantages=advantages(combined),
        align_scale=align_scale,
        disp_weight=disp_weight,
    )
