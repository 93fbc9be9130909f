"""Exception taxonomy shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for every error this package raises on purpose."""


class InvalidArgument(EngineError, ValueError):
    """A caller broke a documented precondition (shape, range, mismatch)."""


class DegenerateInput(EngineError, ValueError):
    """Numerically unusable data, e.g. a near-zero vector fed to a normalizer."""


class FormatError(EngineError, ValueError):
    """A binary embedding file failed validation; messages name byte offsets."""
