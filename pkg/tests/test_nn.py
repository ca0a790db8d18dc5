import math

import numpy as np
import pytest

from epm.errors import DomainError
from epm.nn import MlpModel, fit_mlp, init_weights, mlp_forward, objective


def _model(W, b, v, c):
    return MlpModel(np.array(W, float), np.array(b, float), np.array(v, float), float(c))


def test_forward_examples():
    assert mlp_forward(_model([[0.0]], [0.0], [0.0], 3.0), np.array([[7.0]]))[0] == 3.0
    assert mlp_forward(_model([[0.0]], [0.0], [1.0], 0.0), np.array([[1.0]]))[0] == 0.0
    out = mlp_forward(_model([[1.0]], [0.0], [2.0], 1.0), np.array([[1.0]]))[0]
    assert abs(out - (1 + 2 * math.tanh(1))) < 1e-12
    assert abs(out - 2.5232) < 1e-4
    with pytest.raises(DomainError):
        mlp_forward(_model([[1.0]], [0.0], [2.0], 1.0), np.zeros((1, 2)))


def _fd_gradient(theta, X, y, h, alpha, step=1e-6):
    g = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = step
        g[k] = (objective(theta + e, X, y, h, alpha)[0]
                - objective(theta - e, X, y, h, alpha)[0]) / (2 * step)
    return g


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(10, 3))
    y = rng.normal(size=10)
    h = 4
    for _ in range(5):
        theta = rng.normal(size=h * 3 + 2 * h + 1)
        _, g = objective(theta, X, y, h, 0.01)
        fd = _fd_gradient(theta, X, y, h, 0.01)
        assert np.linalg.norm(g - fd) <= 1e-4 * max(1.0, np.linalg.norm(fd))


def test_bias_terms_not_penalized():
    X = np.zeros((3, 1))
    y = np.zeros(3)
    theta = np.array([0.0, 5.0, 0.0, 0.0])  # W, b, v, c with nonzero hidden bias only
    assert objective(theta, X, y, 1, 10.0)[0] == 0.0


def test_zero_steps_returns_initialization():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(8, 2))
    y = rng.normal(size=8)
    m = fit_mlp(X, y, h=3, steps=0, seed=7)
    np.testing.assert_array_equal(m.pack(), init_weights(3, 2, 7))


def test_trace_non_increasing_and_final_below_initial():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 2))
    y = np.sin(2 * X[:, 0]) + X[:, 1]
    m, trace = fit_mlp(X, y, h=6, steps=50, seed=0, return_trace=True)
    assert all(b <= a + 1e-9 * abs(a) for a, b in zip(trace, trace[1:]))
    final = objective(m.pack(), X, y, 6, 0.01)[0]
    assert final <= trace[0]


def test_zero_target_large_alpha_shrinks_weights():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(20, 2))
    m = fit_mlp(X, np.zeros(20), h=4, alpha=100.0, steps=100)
    assert np.max(np.abs(m.hidden_weights)) < 1e-3 and np.max(np.abs(m.output_weights)) < 1e-3


def test_bump_beats_linear_fit():
    x = np.linspace(-2, 2, 20)
    y = np.exp(-4 * x**2)
    X = x[:, None]
    m = fit_mlp(X, y, h=8, steps=100)
    nn_rmse = np.sqrt(np.mean((mlp_forward(m, X) - y) ** 2))
    A = np.column_stack([x, np.ones_like(x)])
    lin = A @ np.linalg.lstsq(A, y, rcond=None)[0]
    assert nn_rmse < np.sqrt(np.mean((lin - y) ** 2))


def test_row_order_invariance():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(25, 2))
    y = X[:, 0] ** 2
    perm = rng.permutation(25)
    a = mlp_forward(fit_mlp(X, y, h=5, steps=30), X)
    b = mlp_forward(fit_mlp(X[perm], y[perm], h=5, steps=30), X)
    np.testing.assert_allclose(a, b, atol=1e-6)
