"""Frozen class-text table, tunable projector, view filtering, candidate policy.

The classifier itself never trains. All adaptation happens in ProjectorParams,
a D x D map (plus optional bias) applied to image embeddings before the cosine
against the fixed text embeddings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, InvalidArgument
from .numerics import NORM_FLOOR, as_matrix, as_vector, l2_normalize, softmax


@dataclass
class EmbeddingTable:
    """Per-class text embeddings (rows ~unit norm) plus the softmax temperature.

    Rows are stored exactly as supplied so file round-trips stay lossless; an
    exactly renormalized copy (text_unit) backs all similarity math so cosines
    reduce to plain dot products.
    """

    text_embeddings: np.ndarray
    class_names: tuple[str, ...]
    temperature: float = 0.01

    def __post_init__(self):
        emb = np.array(self.text_embeddings, dtype=np.float64)
        if emb.ndim != 2:
            raise InvalidArgument(f"text embeddings must be 2-D, got shape {emb.shape}")
        num_classes, dim = emb.shape
        if num_classes < 2:
            raise InvalidArgument(f"need at least 2 classes, got {num_classes}")
        if dim < 1:
            raise InvalidArgument("embedding dimension must be >= 1")
        if not np.all(np.isfinite(emb)):
            raise InvalidArgument("text embeddings contain NaN or Inf")
        norms = np.linalg.norm(emb, axis=1)
        worst = float(np.abs(norms - 1.0).max())
        if worst > 1e-6:
            raise InvalidArgument(f"text embeddings must be unit norm (worst deviation {worst:.3e})")
        if len(self.class_names) != num_classes:
            raise InvalidArgument(f"{len(self.class_names)} names for {num_classes} classes")
        if not (self.temperature > 0.0 and math.isfinite(self.temperature)):
            raise InvalidArgument(f"temperature must be finite and > 0, got {self.temperature}")
        emb.setflags(write=False)
        self.text_embeddings = emb
        self.class_names = tuple(str(n) for n in self.class_names)
        unit = emb / norms[:, None]
        unit.setflags(write=False)
        self._text_unit = unit

    @property
    def dim(self) -> int:
        return self.text_embeddings.shape[1]

    @property
    def num_classes(self) -> int:
        return self.text_embeddings.shape[0]

    @property
    def text_unit(self) -> np.ndarray:
        """Exactly unit-norm rows used for all similarity computations."""
        return self._text_unit

    def with_temperature(self, temperature: float) -> "EmbeddingTable":
        if temperature == self.temperature:
            return self
        return EmbeddingTable(self.text_embeddings, self.class_names, temperature)


@dataclass
class ProjectorParams:
    """The only trainable state: h = normalize(W z + b)."""

    weight: np.ndarray
    bias: np.ndarray
    use_bias: bool = False

    def __post_init__(self):
        w = np.array(self.weight, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidArgument(f"weight must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidArgument("weight contains NaN or Inf")
        b = np.array(self.bias, dtype=np.float64)
        if b.shape != (w.shape[0],):
            raise InvalidArgument(f"bias shape {b.shape} does not match dim {w.shape[0]}")
        if not np.all(np.isfinite(b)):
            raise InvalidArgument("bias contains NaN or Inf")
        self.weight = w
        self.bias = b

    @classmethod
    def identity(cls, dim: int, use_bias: bool = False) -> "ProjectorParams":
        if dim < 1:
            raise InvalidArgument(f"dim must be >= 1, got {dim}")
        return cls(np.eye(dim), np.zeros(dim), use_bias)

    @property
    def dim(self) -> int:
        return self.weight.shape[0]

    def copy(self) -> "ProjectorParams":
        return ProjectorParams(self.weight.copy(), self.bias.copy(), self.use_bias)


@dataclass
class SampleViews:
    """One test sample: the original embedding plus n augmented-view embeddings.

    n = 0 is legal at rest (files may ship originals only); the adaptation
    entry points require at least one view.
    """

    sample_id: int
    original: np.ndarray
    views: np.ndarray
    label: int | None = None

    def __post_init__(self):
        self.original = as_vector(self.original)
        v = np.asarray(self.views, dtype=np.float64)
        if v.ndim != 2:
            raise InvalidArgument(f"views must be 2-D, got shape {v.shape}")
        if v.shape[1] != self.original.size:
            raise InvalidArgument(
                f"view dim {v.shape[1]} does not match original dim {self.original.size}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("views contain NaN or Inf")
        self.views = v
        if self.label is not None:
            self.label = int(self.label)

    @property
    def num_views(self) -> int:
        return self.views.shape[0]

    @property
    def dim(self) -> int:
        return self.original.size


@dataclass(frozen=True)
class CandidateGroup:
    """The K classes adaptation is allowed to redistribute mass between."""

    class_ids: tuple[int, ...]

    def __post_init__(self):
        ids = tuple(int(i) for i in self.class_ids)
        if len(ids) == 0:
            raise InvalidArgument("candidate group cannot be empty")
        if len(set(ids)) != len(ids):
            raise InvalidArgument(f"candidate ids must be distinct, got {ids}")
        if any(i < 0 for i in ids):
            raise InvalidArgument(f"candidate ids must be >= 0, got {ids}")
        object.__setattr__(self, "class_ids", ids)

    @property
    def k(self) -> int:
        return len(self.class_ids)


@dataclass
class PolicySnapshot:
    """Candidate-restricted policy evaluated under one fixed set of params."""

    probs: np.ndarray
    logits: np.ndarray
    source_params: ProjectorParams
    group: CandidateGroup | None = None


def project(z, params: ProjectorParams) -> np.ndarray:
    """normalize(W z + b); rejects near-zero projections."""
    v = as_vector(z)
    if v.size != params.dim:
        raise InvalidArgument(f"input dim {v.size} does not match projector dim {params.dim}")
    y = params.weight @ v
    if params.use_bias:
        y = y + params.bias
    return l2_normalize(y)


def linear_rows(rows: np.ndarray, params: ProjectorParams) -> np.ndarray:
    """Row-wise W z + b without the normalization step."""
    m = as_matrix(rows)
    if m.shape[1] != params.dim:
        raise InvalidArgument(f"input dim {m.shape[1]} does not match projector dim {params.dim}")
    u = m @ params.weight.T
    if params.use_bias:
        u = u + params.bias
    return u


def project_rows(rows: np.ndarray, params: ProjectorParams) -> np.ndarray:
    """Row-wise projection; same math as project() via one matmul."""
    m = as_matrix(rows)
    u = linear_rows(m, params)
    norms = np.linalg.norm(u, axis=1)
    if m.shape[0] > 0 and float(norms.min()) <= NORM_FLOOR:
        j = int(norms.argmin())
        raise DegenerateInput(f"projected row {j} has norm {norms[j]:.3e}")
    return u / norms[:, None]


def _row_distributions(projected: np.ndarray, table: EmbeddingTable) -> np.ndarray:
    """Per-row class distribution softmax(cos / temperature); rows sum to 1."""
    logits = (projected @ table.text_unit.T) / table.temperature
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def _row_entropies(dists: np.ndarray) -> np.ndarray:
    safe = np.where(dists > 0.0, dists, 1.0)
    return -(dists * np.log(safe)).sum(axis=1)


def class_distribution(projected, table: EmbeddingTable) -> np.ndarray:
    """softmax over cosine(h, t_c) / temperature for a unit-norm embedding h."""
    h = as_vector(projected)
    if h.size != table.dim:
        raise InvalidArgument(f"embedding dim {h.size} does not match table dim {table.dim}")
    return softmax(table.text_unit @ h, table.temperature)


def filter_views(
    sample: SampleViews,
    params: ProjectorParams,
    table: EmbeddingTable,
    keep_fraction: float = 0.1,
) -> np.ndarray:
    """Indices (ascending) of the lowest-entropy views under params.

    Keeps B = max(1, ceil(keep_fraction * n)) views; entropy ties break toward
    the earlier view so the selection is deterministic.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise InvalidArgument(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    n = sample.num_views
    if n < 1:
        raise InvalidArgument(f"sample {sample.sample_id} has no views to filter")
    projected = project_rows(sample.views, params)
    entropies = _row_entropies(_row_distributions(projected, table))
    budget = min(n, max(1, math.ceil(keep_fraction * n)))
    order = np.argsort(entropies, kind="stable")
    return np.sort(order[:budget])


def aggregate_distribution(
    views: np.ndarray, params: ProjectorParams, table: EmbeddingTable
) -> np.ndarray:
    """Mean of per-view class distributions over the given view embeddings."""
    m = as_matrix(views)
    if m.shape[0] < 1:
        raise InvalidArgument("cannot aggregate an empty set of views")
    projected = project_rows(m, params)
    return _row_distributions(projected, table).mean(axis=0)


def topk_candidates(distribution, k: int) -> CandidateGroup:
    """Top-k class ids by probability, descending; ties break to lower id."""
    p = as_vector(distribution)
    if not 1 <= k <= p.size:
        raise InvalidArgument(f"k must be in [1, {p.size}], got {k}")
    order = np.lexsort((np.arange(p.size), -p))
    return CandidateGroup(tuple(int(i) for i in order[:k]))


def candidate_policy(
    views: np.ndarray,
    params: ProjectorParams,
    table: EmbeddingTable,
    group: CandidateGroup,
) -> PolicySnapshot:
    """Softmax over mean-across-views cosine logits for the K candidates.

    Averaging happens on the logits (cosine / temperature), which is the
    quantity the gradient flows through; aggregate_distribution averages the
    per-view softmaxes instead and is only used for candidate selection and
    reporting.
    """
    m = as_matrix(views)
    if m.shape[0] < 1:
        raise InvalidArgument("candidate policy needs at least one view")
    if max(group.class_ids) >= table.num_classes:
        raise InvalidArgument(
            f"candidate id {max(group.class_ids)} out of range for {table.num_classes} classes"
        )
    projected = project_rows(m, params)
    sims = projected @ table.text_unit[list(group.class_ids)].T
    logits = sims.mean(axis=0) / table.temperature
    probs = softmax(logits)
    return PolicySnapshot(probs=probs, logits=logits, source_params=params.copy(), group=group)
