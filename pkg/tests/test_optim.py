import numpy as np
import pytest

from grpo_tta.errors import InvalidArgument
from grpo_tta.numerics import SeededRng
from grpo_tta.objective import ParamGrad
from grpo_tta.optim import OptimState, optimizer_step
from grpo_tta.policy import ProjectorParams


def params_of(weight, bias=None):
    w = np.asarray(weight, dtype=float)
    if bias is None:
        return ProjectorParams(w, np.zeros(w.shape[0]), use_bias=False)
    return ProjectorParams(w, np.asarray(bias, dtype=float), use_bias=True)


def test_zero_gradient_pure_decay():
    lr, wd = 1e-2, 0.1
    params = params_of(np.diag([2.0, -3.0]))
    state = OptimState.for_params(params, learning_rate=lr, weight_decay=wd)
    zero = ParamGrad(np.zeros((2, 2)))
    start = params.weight.copy()
    for n in range(1, 6):
        optimizer_step(params, zero, state)
        # zero moments make the adaptive term vanish, leaving pure decay
        assert np.allclose(params.weight, start * (1.0 - lr * wd) ** n, rtol=1e-14)
    assert state.step == 5


def test_first_step_moves_by_learning_rate():
    # with constant gradient, bias correction makes m_hat = g and v_hat = g^2,
    # so the first step is -lr * g / (|g| + eps)
    lr = 1e-3
    params = params_of(np.zeros((2, 2)))
    state = OptimState.for_params(params, learning_rate=lr, weight_decay=0.0)
    grad = ParamGrad(np.array([[1.0, -1.0], [2.0, -0.5]]))
    optimizer_step(params, grad, state)
    expected = -lr * np.sign(grad.weight) * np.abs(grad.weight) / (np.abs(grad.weight) + 1e-8)
    assert np.allclose(params.weight, expected, atol=1e-15)
    assert abs(params.weight[0, 0] + lr) < 2e-11


def test_zero_learning_rate_is_a_bitwise_noop():
    rng = SeededRng(3)
    params = params_of(np.eye(3) + 0.1 * rng.normal(9).reshape(3, 3), bias=rng.normal(3))
    state = OptimState.for_params(params, learning_rate=0.0)
    before_w = params.weight.copy()
    before_b = params.bias.copy()
    grad = ParamGrad(rng.normal(9).reshape(3, 3), rng.normal(3))
    for _ in range(3):
        optimizer_step(params, grad, state)
    assert (params.weight == before_w).all()
    assert (params.bias == before_b).all()
    # moments still accumulate; only the parameters stand still
    assert not (state.m_weight == 0.0).all()


def test_decay_is_decoupled_from_moments():
    # decay first, then the moment step: p' = p(1 - lr wd) - lr m_hat/(sqrt(v_hat)+eps).
    # a coupled implementation would scale the moment step by (1 - lr wd) too.
    lr, wd = 0.1, 5.0
    params = params_of(np.array([[4.0]]))
    state = OptimState.for_params(params, learning_rate=lr, weight_decay=wd)
    grad = ParamGrad(np.array([[2.0]]))
    optimizer_step(params, grad, state)
    adaptive = lr * 2.0 / (2.0 + 1e-8)
    decoupled = 4.0 * (1.0 - lr * wd) - adaptive
    coupled = (4.0 - adaptive) * (1.0 - lr * wd)
    assert abs(params.weight[0, 0] - decoupled) < 1e-12
    assert abs(params.weight[0, 0] - coupled) > 1e-3


def test_bias_updates_alongside_weight():
    params = params_of(np.zeros((2, 2)), bias=[0.0, 0.0])
    state = OptimState.for_params(params, learning_rate=1e-3, weight_decay=0.0)
    grad = ParamGrad(np.ones((2, 2)), np.array([1.0, -1.0]))
    optimizer_step(params, grad, state)
    assert params.bias[0] < 0.0 < params.bias[1]
    assert state.m_bias is not None and not (state.m_bias == 0.0).all()


def test_step_returns_same_objects():
    params = params_of(np.eye(2))
    state = OptimState.for_params(params)
    out_params, out_state = optimizer_step(params, ParamGrad(np.ones((2, 2))), state)
    assert out_params is params
    assert out_state is state


def test_moments_follow_exponential_averages():
    lr, b1, b2 = 1e-3, 0.9, 0.999
    params = params_of(np.zeros((1, 1)))
    state = OptimState.for_params(params, learning_rate=lr, weight_decay=0.0)
    g1, g2 = 3.0, -1.0
    optimizer_step(params, ParamGrad(np.array([[g1]])), state)
    optimizer_step(params, ParamGrad(np.array([[g2]])), state)
    m = (1 - b1) * (b1 * g1 + g2)
    v = (1 - b2) * (b2 * g1 * g1 + g2 * g2)
    assert abs(state.m_weight[0, 0] - m) < 1e-15
    assert abs(state.v_weight[0, 0] - v) < 1e-15


def test_rejects_shape_mismatch_and_nonfinite():
    params = params_of(np.eye(2))
    state = OptimState.for_params(params)
    with pytest.raises(InvalidArgument):
        optimizer_step(params, ParamGrad(np.ones((3, 3))), state)
    bad = ParamGrad(np.array([[np.nan, 0.0], [0.0, 0.0]]))
    with pytest.raises(InvalidArgument):
        optimizer_step(params, bad, state)


def test_rejects_missing_bias_gradient():
    params = params_of(np.eye(2), bias=[0.0, 0.0])
    state = OptimState.for_params(params)
    with pytest.raises(InvalidArgument):
        optimizer_step(params, ParamGrad(np.zeros((2, 2)), None), state)


def test_state_validation():
    z = np.zeros((2, 2))
    with pytest.raises(InvalidArgument):
        OptimState(z, z, None, None, learning_rate=-1.0)
    with pytest.raises(InvalidArgument):
        OptimState(z, z, None, None, weight_decay=-0.1)
    with pytest.raises(InvalidArgument):
        OptimState(z, z, None, None, beta1=1.0)
    with pytest.raises(InvalidArgument):
        OptimState(z, z, None, None, eps=0.0)


def test_default_hyperparameters():
    state = OptimState.for_params(params_of(np.eye(2)))
    assert state.learning_rate == 5e-6
    assert state.weight_decay == 5e-4
    assert state.beta1 == 0.9
    assert state.beta2 == 0.999
    assert state.eps == 1e-8
