"""One-hidden-layer tanh network trained on a weight-decayed squared error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import DomainError, TrainingError

INIT_SCALE = 0.1


@dataclass(frozen=True)
class MlpModel:
    hidden_weights: np.ndarray  # (h, p)
    hidden_biases: np.ndarray  # (h,)
    output_weights: np.ndarray  # (h,)
    output_bias: float
    alpha: float = 0.01
    residual_var: float = 1e-6

    @property
    def h(self) -> int:
        return self.hidden_weights.shape[0]

    @property
    def p(self) -> int:
        return self.hidden_weights.shape[1]

    def pack(self) -> np.ndarray:
        return _pack(self.hidden_weights, self.hidden_biases, self.output_weights,
                     self.output_bias)


def _pack(W, b, v, c):
    return np.concatenate([W.ravel(), b, v, [c]])


def _unpack(theta, h, p):
    W = theta[: h * p].reshape(h, p)
    b = theta[h * p: h * p + h]
    v = theta[h * p + h: h * p + 2 * h]
    return W, b, v, float(theta[-1])


def mlp_forward(model: MlpModel, X) -> np.ndarray:
    """sum_j tanh(w_j . x + b_j) * v_j + c, for each row of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.p:
        raise DomainError(f"expected {model.p} inputs, got {X.shape[1]}")
    H = np.tanh(X @ model.hidden_weights.T + model.hidden_biases)
    return H @ model.output_weights + model.output_bias


def objective(theta, X, y, h, alpha):
    """Squared error plus ``alpha`` times the squared norm of non-bias weights.

    Returns ``(value, gradient)``.
    """
    p = X.shape[1]
    W, b, v, c = _unpack(theta, h, p)
    A = X @ W.T + b
    H = np.tanh(A)
    r = H @ v + c - y
    value = float(r @ r + alpha * (np.sum(W * W) + v @ v))
    dout = 2.0 * r
    gv = H.T @ dout + 2.0 * alpha * v
    gc = float(dout.sum())
    dA = np.outer(dout, v) * (1.0 - H * H)
    gW = dA.T @ X + 2.0 * alpha * W
    gb = dA.sum(axis=0)
    return value, _pack(gW, gb, gv, gc)


def init_weights(h: int, p: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-INIT_SCALE, INIT_SCALE, size=h * p + 2 * h + 1)


def fit_mlp(X, y, h: int = 28, alpha: float = 0.01, steps: int = 100, seed: int = 0,
            return_trace: bool = False):
    """Minimize the regularized error with at most ``steps`` L-BFGS iterations.

    With ``return_trace`` the objective value after every accepted iteration
    is returned as well (its first entry is the initial objective).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("need at least one training row")
    h = int(h)
    if h < 1:
        raise ValueError("h must be >= 1")
    p = X.shape[1]
    theta0 = init_weights(h, p, seed)
    f0, _ = objective(theta0, X, y, h, alpha)
    if not np.isfinite(f0):
        raise TrainingError("objective is not finite at initialization")
    trace = [f0]
    theta = theta0
    if steps > 0:
        def fun(t):
            val, g = objective(t, X, y, h, alpha)
            if not np.isfinite(val):
                raise TrainingError("objective overflowed during training")
            return val, g

        def callback(xk):
            trace.append(objective(xk, X, y, h, alpha)[0])

        res = scipy.optimize.minimize(fun, theta0, jac=True, method="L-BFGS-B",
                                      callback=callback,
                                      options={"maxiter": int(steps), "maxfun": 20 * int(steps)})
        theta = res.x
        if objective(theta, X, y, h, alpha)[0] > f0:
            theta = theta0
    W, b, v, c = _unpack(theta, h, p)
    r = np.tanh(X @ W.T + b) @ v + c - y
    model = MlpModel(W.copy(), b.copy(), v.copy(), c, alpha,
                     residual_var=max(float(np.mean(r**2)), 1e-6))
    return (model, trace) if return_trace else model
