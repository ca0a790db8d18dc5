"""Gaussian process regression with a mixed continuous/categorical kernel.

The kernel is ``exp(-sum_cont lambda_l (x_l - x'_l)^2 - sum_cat lambda_l
[x_l != x'_l])``; categorical columns hold integer codes. Also provides the
projected-process (PP) approximation built on an active subset of points.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.optimize

from .data import PredictiveDistribution
from .errors import NumericalError

JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
LOG_LAMBDA_BOUNDS = (-12.0, 12.0)
LOG_NOISE_BOUNDS = (np.log(1e-10), np.log(10.0))


@dataclass(frozen=True)
class KernelParams:
    lambdas: np.ndarray
    noise_var: float
    cat_mask: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).reshape(-1)
        mask = np.asarray(self.cat_mask, dtype=bool).reshape(-1)
        if mask.size == 0 and lam.size:
            mask = np.zeros(lam.size, dtype=bool)
        if lam.shape != mask.shape:
            raise ValueError("one kind flag per lambda is required")
        if np.any(~(lam > 0)) or not self.noise_var > 0:
            raise ValueError("kernel parameters must be strictly positive")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "cat_mask", mask)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @classmethod
    def default(cls, p: int, cat_mask=None, noise_var: float = 0.01) -> "KernelParams":
        mask = np.zeros(p, dtype=bool) if cat_mask is None else cat_mask
        return cls(np.ones(p), noise_var, mask)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([np.log(self.lambdas), [np.log(self.noise_var)]])

    def from_vector(self, theta) -> "KernelParams":
        return replace(self, lambdas=np.exp(theta[:-1]), noise_var=float(np.exp(theta[-1])))


def k_cont(xi, xj, lambdas) -> float:
    xi, xj, lam = (np.asarray(a, dtype=float) for a in (xi, xj, lambdas))
    return float(np.exp(-np.sum(lam * (xi - xj) ** 2)))


def k_cat(xi, xj, lambdas) -> float:
    xi, xj, lam = np.asarray(xi), np.asarray(xj), np.asarray(lambdas, dtype=float)
    return float(np.exp(-np.sum(lam * (xi != xj))))


def k_mixed(xi, xj, params: KernelParams) -> float:
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    if xi.shape != params.lambdas.shape or xj.shape != params.lambdas.shape:
        raise ValueError("input arity does not match the kernel's dimension kinds")
    cat = params.cat_mask
    d = np.where(cat, (xi != xj).astype(float), (xi - xj) ** 2)
    return float(np.exp(-np.sum(params.lambdas * d)))


def _dim_distance(a, b, categorical):
    if categorical:
        return (a[:, None] != b[None, :]).astype(float)
    diff = a[:, None] - b[None, :]
    return diff * diff


def gram(A, B, params: KernelParams) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` and ``B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    expo = np.zeros((A.shape[0], B.shape[0]))
    for l, lam in enumerate(params.lambdas):
        expo -= lam * _dim_distance(A[:, l], B[:, l], params.cat_mask[l])
    return np.exp(expo)


def stable_cholesky(A):
    """Lower Cholesky factor, adding diagonal jitter 1e-10 .. 1e-6 on failure."""
    for jitter in JITTERS:
        try:
            M = A if jitter == 0 else A + jitter * np.eye(len(A))
            return np.linalg.cholesky(M), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError("matrix is not positive definite even after jitter 1e-6")


def log_marginal_likelihood(params: KernelParams, X, y, grad: bool = False):
    """log p(y | X, params) of the zero-mean GP, optionally with the gradient
    with respect to ``params.to_vector()`` (log lambdas, log noise)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    K = gram(X, X, params)
    Ky = K + params.noise_var * np.eye(n)
    L, _ = stable_cholesky(Ky)
    alpha = scipy.linalg.cho_solve((L, True), y)
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2 * np.pi)
    if not grad:
        return float(lml)
    Kinv = scipy.linalg.cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - Kinv
    WK = W * K
    g = np.empty(len(params.lambdas) + 1)
    for l, lam in enumerate(params.lambdas):
        D = _dim_distance(X[:, l], X[:, l], params.cat_mask[l])
        g[l] = -0.5 * lam * np.sum(WK * D)
    g[-1] = 0.5 * params.noise_var * np.trace(W)
    return float(lml), g


@dataclass(frozen=True)
class GpModel:
    params: KernelParams
    X: np.ndarray
    y: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0


class _BudgetExhausted(Exception):
    pass


def optimize_hyperparameters(X, y, init: KernelParams, opt_steps: int) -> KernelParams:
    """Maximize the marginal likelihood with L-BFGS in log space.

    ``opt_steps`` bounds the number of objective evaluations; the best
    evaluated point (the initial one included) is returned.
    """
    if opt_steps <= 0:
        return init
    best = {"f": np.inf, "theta": init.to_vector()}
    count = [0]

    def fun(theta):
        if count[0] >= opt_steps:
            raise _BudgetExhausted
        count[0] += 1
        try:
            val, g = log_marginal_likelihood(init.from_vector(theta), X, y, grad=True)
        except NumericalError:
            return 1e300, np.zeros_like(theta)
        if val == -np.inf or not np.isfinite(val):
            return 1e300, np.zeros_like(theta)
        if -val < best["f"]:
            best["f"], best["theta"] = -val, theta.copy()
        return -val, -g

    bounds = [LOG_LAMBDA_BOUNDS] * len(init.lambdas) + [LOG_NOISE_BOUNDS]
    theta0 = np.clip(init.to_vector(), [b[0] for b in bounds], [b[1] for b in bounds])
    try:
        scipy.optimize.minimize(fun, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
                                options={"maxfun": opt_steps, "maxiter": opt_steps})
    except _BudgetExhausted:
        pass
    if not np.isfinite(best["f"]):
        return init
    init_f = -log_marginal_likelihood(init, X, y) if not np.array_equal(theta0, init.to_vector()) \
        else None
    if init_f is not None and init_f <= best["f"]:
        return init
    return init.from_vector(best["theta"])


def gp_fit(X, y, init: KernelParams, opt_steps: int = 50) -> GpModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    params = optimize_hyperparameters(X, y, init, opt_steps)
    Ky = gram(X, X, params) + params.noise_var * np.eye(len(y))
    L, jitter = stable_cholesky(Ky)
    alpha = scipy.linalg.cho_solve((L, True), y)
    return GpModel(params, X.copy(), y.copy(), L, alpha, jitter)


def gp_predict(model: GpModel, X) -> PredictiveDistribution:
    Ks = gram(model.X, X, model.params)  # (n, q)
    mean = Ks.T @ model.alpha
    V = scipy.linalg.solve_triangular(model.chol, Ks, lower=True)
    var = 1.0 + model.params.noise_var - np.sum(V * V, axis=0)
    return PredictiveDistribution(mean, np.maximum(var, 0.0))


@dataclass(frozen=True)
class PpModel:
    params: KernelParams
    X_active: np.ndarray
    active_set: np.ndarray
    hyper_set: np.ndarray
    chol_aa: np.ndarray  # Cholesky of K_aa
    chol_b: np.ndarray  # Cholesky of s2 I + (L^-1 K_an)(L^-1 K_an)^T
    weights: np.ndarray  # B^-1 L^-1 K_an y


def pp_fit(X, y, a: int = 300, h: int = 50, seed: int = 0, init: KernelParams | None = None,
           cat_mask=None) -> PpModel:
    """Hyperparameters from an exact GP on one random subset of ``a`` points,
    PP caches on a second, independently drawn subset."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one training point")
    if init is None:
        init = KernelParams.default(X.shape[1], cat_mask)
    a = min(int(a), n)
    rng = np.random.default_rng(seed)
    hyper_set = rng.choice(n, size=a, replace=False)
    params = optimize_hyperparameters(X[hyper_set], y[hyper_set], init, h)
    active = rng.choice(n, size=a, replace=False)
    return _pp_build(X, y, params, active, hyper_set)


def _pp_build(X, y, params, active, hyper_set) -> PpModel:
    Xa = X[active]
    L, _ = stable_cholesky(gram(Xa, Xa, params))
    A = scipy.linalg.solve_triangular(L, gram(Xa, X, params), lower=True)
    B = params.noise_var * np.eye(len(active)) + A @ A.T
    LB, _ = stable_cholesky(B)
    w = scipy.linalg.cho_solve((LB, True), A @ y)
    return PpModel(params, Xa.copy(), np.asarray(active), np.asarray(hyper_set), L, LB, w)


def pp_predict(model: PpModel, X) -> PredictiveDistribution:
    """mu = k*^T (s2 K_aa + K_an K_an^T)^-1 K_an y;
    var = k** - k*^T K_aa^-1 k* + s2 k*^T (s2 K_aa + K_an K_an^T)^-1 k*.

    Evaluated through ``K_aa = L L^T`` so that the middle matrix becomes
    ``L (s2 I + A A^T) L^T`` with ``A = L^-1 K_an``.
    """
    Ks = gram(model.X_active, X, model.params)  # (a, q)
    U = scipy.linalg.solve_triangular(model.chol_aa, Ks, lower=True)
    mean = U.T @ model.weights
    V = scipy.linalg.solve_triangular(model.chol_b, U, lower=True)
    s2 = model.params.noise_var
    prior_gap = np.maximum(1.0 - np.sum(U * U, axis=0), 0.0)
    var = prior_gap + s2 + s2 * np.sum(V * V, axis=0)
    return PredictiveDistribution(mean, var)
