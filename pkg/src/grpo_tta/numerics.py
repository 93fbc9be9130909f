"""Float64 vector primitives and a counter-based deterministic RNG.

Everything downstream (policy, rewards, objective) funnels through these few
functions, so validation lives here once: finite entries, sane shapes, and the
degenerate-norm guard.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInput, InvalidArgument

_MASK64 = (1 << 64) - 1

# Norms at or below this are treated as zero for normalization purposes.
NORM_FLOOR = 1e-12


def as_vector(values) -> np.ndarray:
    """Coerce to a finite float64 1-D array of length >= 1."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidArgument(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgument("vector contains NaN or Inf")
    return v


def as_matrix(values) -> np.ndarray:
    """Coerce to a finite float64 2-D array."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidArgument(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgument("matrix contains NaN or Inf")
    return m


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Numerically stable softmax of logits/temperature.

    Stays finite for any finite input; output sums to 1 and every entry is
    strictly positive unless the scaled logit gap underflows exp.
    """
    if not (temperature > 0.0 and np.isfinite(temperature)):
        raise InvalidArgument(f"temperature must be finite and > 0, got {temperature}")
    z = as_vector(logits) / temperature
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def shannon_entropy(probs) -> float:
    """Entropy in nats of a probability vector; 0 * log 0 counts as 0."""
    p = as_vector(probs)
    if np.any(p < 0.0):
        raise InvalidArgument("probabilities must be nonnegative")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise InvalidArgument(f"probabilities must sum to 1, got {p.sum()!r}")
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def cosine(u, v) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    a = as_vector(u)
    b = as_vector(v)
    if a.size != b.size:
        raise InvalidArgument(f"length mismatch: {a.size} vs {b.size}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na <= NORM_FLOOR or nb <= NORM_FLOOR:
        raise InvalidArgument("cosine of a zero-norm vector is undefined")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def l2_normalize(v) -> np.ndarray:
    """Return v / ||v||; rejects near-zero norms instead of amplifying noise."""
    a = as_vector(v)
    n = float(np.linalg.norm(a))
    if n <= NORM_FLOOR:
        raise DegenerateInput(f"cannot normalize vector with norm {n:.3e}")
    return a / n


class SeededRng:
    """Deterministic random stream backed by the Philox counter-based generator.

    The same (seed, stream) pair yields the same draws on any platform, which is
    what makes synthetic datasets and worker-count-independent runs repeatable.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def derive(self, index: int) -> "SeededRng":
        """Independent child stream; index 0 is already distinct from the root."""
        if index < 0:
            raise InvalidArgument(f"stream index must be >= 0, got {index}")
        return SeededRng(self.seed, int(index) + 1)

    def normal(self, dim: int, sigma: float = 1.0) -> np.ndarray:
        return gaussian_sample(self, dim, sigma)

    def integer(self, upper: int) -> int:
        """Uniform draw from [0, upper)."""
        if upper < 1:
            raise InvalidArgument(f"upper bound must be >= 1, got {upper}")
        return int(self._gen.integers(upper))

    def __repr__(self) -> str:  # pragma: no cover
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def gaussian_sample(rng: SeededRng, dim: int, sigma: float) -> np.ndarray:
    """dim i.i.d. zero-mean Gaussian draws with standard deviation sigma."""
    if dim < 1:
        raise InvalidArgument(f"dim must be >= 1, got {dim}")
    if not (sigma >= 0.0 and np.isfinite(sigma)):
        raise InvalidArgument(f"sigma must be finite and >= 0, got {sigma}")
    return sigma * rng._gen.standard_normal(dim)
