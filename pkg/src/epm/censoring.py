"""Right-censored responses: truncated normals and the Schmee & Hahn EM.

A censored run only tells us ``y >= z``. The EM starts from a forest fit on
the uncensored points, then alternates between imputing each censored value
from its predictive normal truncated at ``z`` and refitting the forest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

from .errors import ConfigurationError, TrainingError
from .forest import ForestModel, aggregate, fit_forest, tree_outputs

log = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)


@dataclass(frozen=True)
class CensoredFitConfig:
    """``variant`` is "mean" (impute conditional means) or "sample" (impute
    stratified draws, one per tree). ``kappa_max`` caps imputations on the
    model's response scale; ``None`` means the largest censoring threshold."""

    variant: str = "mean"
    max_iters: int = 20
    tol: float = 1e-3
    kappa_max: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("mean", "sample"):
            raise ConfigurationError(f"unknown EM variant {self.variant!r}")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if self.kappa_max is not None and not np.isfinite(self.kappa_max):
            raise ConfigurationError("kappa_max must be finite")


def _alpha(mu, var, kappa):
    var = np.asarray(var, dtype=float)
    if np.any(~(var > 0)):
        raise ValueError("variance must be > 0")
    sigma = np.sqrt(var)
    return sigma, (np.asarray(kappa, dtype=float) - mu) / sigma


def trunc_normal_mean(mu, var, kappa):
    """E[Y | Y >= kappa] for Y ~ N(mu, var).

    The inverse Mills ratio is evaluated in log space, which stays accurate
    far into the upper tail where ``1 - Phi(alpha)`` underflows.
    """
    mu = np.asarray(mu, dtype=float)
    sigma, a = _alpha(mu, var, kappa)
    mills = np.exp(-0.5 * a * a - _LOG_SQRT_2PI - log_ndtr(-a))
    out = np.maximum(mu + sigma * mills, kappa)
    return out.item() if out.ndim == 0 else out


def trunc_normal_ppf(u, mu, var, kappa):
    """Quantile ``u`` of N(mu, var) truncated to [kappa, inf)."""
    mu = np.asarray(mu, dtype=float)
    sigma, a = _alpha(mu, var, kappa)
    u = np.asarray(u, dtype=float)
    # upper-tail mass above the draw is (1 - u) * (1 - Phi(alpha))
    x = mu - sigma * ndtri_exp(np.log1p(-u) + log_ndtr(-a))
    return np.maximum(x, kappa)


def trunc_normal_sample(mu, var, kappa, rng, size=None):
    """Inverse-CDF draws from N(mu, var) truncated to [kappa, inf)."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    shape = size if size is not None else np.broadcast(np.asarray(mu), np.asarray(kappa)).shape
    out = trunc_normal_ppf(rng.random(shape), mu, var, kappa)
    return out.item() if np.ndim(out) == 0 else out


def stratified_uniforms(n_points: int, B: int, seed: int = 0) -> np.ndarray:
    """(n_points, B) uniforms; row i puts one value in each band [k/B, (k+1)/B),
    with the band-to-tree assignment a fixed per-point permutation."""
    rng = np.random.default_rng(seed)
    bands = np.argsort(rng.random((n_points, B)), axis=1)
    offsets = rng.random((n_points, B))
    return (bands + offsets) / B


def _impute(model: ForestModel, X, z, cfg: CensoredFitConfig, kappa_max, strata):
    mus, vs = tree_outputs(model, X)
    mu, var = aggregate(mus, vs)
    var = np.maximum(var, 1e-12)
    if cfg.variant == "mean":
        m = trunc_normal_mean(mu, var, z)
        return np.maximum(z, np.minimum(kappa_max, m))[:, None].repeat(model.B, axis=1)
    draws = trunc_normal_ppf(strata, mu[:, None], var[:, None], z[:, None])
    return _shift_to_cap(draws, z, kappa_max)


def _shift_to_cap(draws, z, kappa_max):
    """Shift each row down by the smallest s >= 0 such that the mean of
    max(draws - s, z) is at most max(kappa_max, z).

    A plain shift by (mean - kappa_max) followed by the clamp at z can push
    the mean back above the cap, so the shift is found by bisection on the
    clamped mean (monotone and piecewise linear in s).
    """
    zc = z[:, None]
    target = np.maximum(kappa_max, z)
    over = draws.mean(axis=1) > target
    if not over.any():
        return draws
    d, zo, t = draws[over], zc[over], target[over]
    lo = np.zeros(d.shape[0])
    hi = (d - zo).max(axis=1)  # shifting by hi sends every draw to z
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        too_high = np.maximum(d - mid[:, None], zo).mean(axis=1) > t
        lo = np.where(too_high, mid, lo)
        hi = np.where(too_high, hi, mid)
    out = draws.copy()
    out[over] = np.maximum(d - hi[:, None], zo)
    return out


def fit_forest_censored(X, y, censored, cfg: CensoredFitConfig | None = None, cat_sizes=None,
                        return_trace: bool = False, **forest_kw):
    """Schmee & Hahn EM around :func:`epm.forest.fit_forest`.

    ``y`` holds the observed value for uncensored rows and the censoring
    threshold for censored rows. Forest keyword arguments (B, perc, n_min,
    var_floor, seed, n_jobs) are passed through; tree seeds stay fixed
    across iterations.
    """
    cfg = cfg or CensoredFitConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    cens = np.asarray(censored, dtype=bool)
    if y.shape != cens.shape or X.shape[0] != y.size:
        raise ValueError("X, y and censored must have matching lengths")
    if cens.all():
        raise TrainingError("every point is censored; the initial fit needs uncensored data")
    forest_kw.setdefault("seed", cfg.seed)
    B = forest_kw.get("B", 10)
    if not cens.any():
        return (fit_forest(X, y, cat_sizes, **forest_kw), []) if return_trace \
            else fit_forest(X, y, cat_sizes, **forest_kw)

    z = y[cens]
    kappa_max = float(np.max(z)) if cfg.kappa_max is None else float(cfg.kappa_max)
    model = fit_forest(X[~cens], y[~cens], cat_sizes, **forest_kw)
    strata = stratified_uniforms(int(cens.sum()), B, cfg.seed) if cfg.variant == "sample" \
        else None
    Y = np.repeat(y[:, None], B, axis=1)
    prev = None
    trace = []
    for it in range(cfg.max_iters):
        imp = _impute(model, X[cens], z, cfg, kappa_max, strata)
        Y[cens] = imp
        model = fit_forest(X, Y, cat_sizes, **forest_kw)
        change = np.inf if prev is None else float(np.max(np.abs(imp - prev)))
        trace.append(change)
        log.debug("EM iteration %d: max imputation change %.3g", it + 1, change)
        prev = imp
        if change < cfg.tol or not np.isfinite(cfg.tol):
            break
    return (model, trace) if return_trace else model


def fit_drop_censored(X, y, censored, cat_sizes=None, **forest_kw) -> ForestModel:
    """Baseline: ignore censored runs entirely."""
    keep = ~np.asarray(censored, dtype=bool)
    if not keep.any():
        raise TrainingError("every point is censored")
    return fit_forest(np.asarray(X)[keep], np.asarray(y)[keep], cat_sizes, **forest_kw)


def fit_pretend_uncensored(X, y, censored, cat_sizes=None, **forest_kw) -> ForestModel:
    """Baseline: treat censoring thresholds as observed runtimes."""
    return fit_forest(X, y, cat_sizes, **forest_kw)
