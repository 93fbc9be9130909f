"""Adaptive moment optimizer with decoupled weight decay.

Decay multiplies the parameters directly (p *= 1 - lr * wd) instead of being
folded into the gradient, so the moment estimates never see it. One state
object per episode; nothing is shared across samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .objective import ParamGrad
from .policy import ProjectorParams


@dataclass
class OptimState:
    """First/second moment accumulators plus the hyperparameters."""

    m_weight: np.ndarray
    v_weight: np.ndarray
    m_bias: np.ndarray | None
    v_bias: np.ndarray | None
    step: int = 0
    learning_rate: float = 5e-6
    weight_decay: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (self.learning_rate >= 0.0 and np.isfinite(self.learning_rate)):
            raise InvalidArgument(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if not (self.weight_decay >= 0.0 and np.isfinite(self.weight_decay)):
            raise InvalidArgument(f"weight_decay must be finite and >= 0, got {self.weight_decay}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise InvalidArgument(f"betas must be in [0, 1), got {self.beta1}, {self.beta2}")
        if not (self.eps > 0.0):
            raise InvalidArgument(f"eps must be > 0, got {self.eps}")

    @classmethod
    def for_params(
        cls,
        params: ProjectorParams,
        learning_rate: float = 5e-6,
        weight_decay: float = 5e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "OptimState":
        dim = params.dim
        return cls(
            m_weight=np.zeros((dim, dim)),
            v_weight=np.zeros((dim, dim)),
            m_bias=np.zeros(dim) if params.use_bias else None,
            v_bias=np.zeros(dim) if params.use_bias else None,
            learning_rate=learning_rate,
            weight_decay=weight_decay,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def _update(param, grad, m, v, state: OptimState) -> None:
    if state.weight_decay != 0.0:
        param *= 1.0 - state.learning_rate * state.weight_decay
    m *= state.beta1
    m += (1.0 - state.beta1) * grad
    v *= state.beta2
    v += (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**state.step)
    v_hat = v / (1.0 - state.beta2**state.step)
    param -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


def optimizer_step(
    params: ProjectorParams, grad: ParamGrad, state: OptimState
) -> tuple[ProjectorParams, OptimState]:
    """One in-place update of params and state; returns both for chaining."""
    if grad.weight.shape != params.weight.shape:
        raise InvalidArgument(
            f"gradient shape {grad.weight.shape} does not match weight {params.weight.shape}"
        )
    if params.use_bias and (grad.bias is None or state.m_bias is None):
        raise InvalidArgument("projector uses a bias but gradient or state has none")
    if not np.all(np.isfinite(grad.weight)):
        raise InvalidArgument("gradient contains NaN or Inf")
    state.step += 1
    _update(params.weight, grad.weight, state.m_weight, state.v_weight, state)
    if params.use_bias:
        if not np.all(np.isfinite(grad.bias)):
            raise InvalidArgument("bias gradient contains NaN or Inf")
        _update(params.bias, grad.bias, state.m_bias, state.v_bias, state)
    return params, state
