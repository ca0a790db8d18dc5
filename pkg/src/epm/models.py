"""Uniform fit/predict pipeline over all model families.

An :class:`EPM` owns the whole input path for one family: categorical
columns are 1-in-K encoded for families that need numeric inputs, constant
columns are dropped, the rest are z-scored, and for the GP families the
response is centered. Predictions are log10-runtime distributions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .censoring import (
    CensoredFitConfig,
    fit_drop_censored,
    fit_forest_censored,
    fit_pretend_uncensored,
)
from .data import CATEGORICAL, PredictiveDistribution
from .errors import ConfigurationError, DomainError, EncodingError
from .forest import fit_forest, predict_forest
from .gp import KernelParams, gp_fit, gp_predict, pp_fit, pp_predict
from .nn import fit_mlp, mlp_forward
from .preprocess import apply_normalizer, fit_normalizer, one_in_k_encode
from .regtree import grow_tree, prune_tree
from .ridge import forward_select_two_phase, spore_foba

log = logging.getLogger(__name__)

CENSORING_STRATEGIES = ("drop", "uncensored", "sh-mean", "sh-sample")


@dataclass(frozen=True)
class Family:
    name: str
    defaults: dict
    encode: bool  # 1-in-K encode categorical inputs
    self_normalizing: bool = False  # the fitter standardizes on its own
    description: str = ""


FAMILIES = {
    "rr": Family("rr", {"l": 30, "q": 20, "eps": 1e-3, "inner_folds": 5}, True, True,
                 "ridge regression, two-phase forward selection"),
    "spore": Family("spore", {"eps": 1e-3, "t_max": 10, "gamma": 0.01}, True, True,
                    "SPORE-FoBa sparse polynomial ridge regression"),
    "nn": Family("nn", {"h": 28, "alpha": 0.01, "steps": 100}, True, False,
                 "one-hidden-layer tanh network"),
    "gp": Family("gp", {"opt_steps": 50, "noise_var": 0.01}, False, False,
                 "exact Gaussian process, mixed kernel"),
    "pp": Family("pp", {"a": 300, "h": 50, "noise_var": 0.01}, False, False,
                 "projected-process GP approximation"),
    "rt": Family("rt", {"folds": 10}, False, False, "pruned regression tree"),
    "rf": Family("rf", {"B": 10, "perc": 0.5, "n_min": 5, "var_floor": 0.01}, False, False,
                 "random forest with leaf variances"),
}


@dataclass
class EPM:
    """Unfitted-then-fitted model of one family; see :func:`make_model`."""

    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    n_jobs: int = 1
    # fitted state
    n_input: int | None = None
    cat_sizes: dict = field(default_factory=dict)
    encoding_map: dict = field(default_factory=dict)
    state: object = None
    y_offset: float = 0.0
    residual_var: float | None = None
    core: object = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown model family {self.family!r}")
        fam = FAMILIES[self.family]
        unknown = set(self.params) - set(fam.defaults)
        if unknown:
            raise ConfigurationError(f"unknown {self.family} hyperparameters: {sorted(unknown)}")
        self.params = dict(fam.defaults, **self.params)

    @property
    def fitted(self) -> bool:
        return self.core is not None

    # -- input path -------------------------------------------------------

    def _check_codes(self, X):
        for j, k in self.cat_sizes.items():
            col = X[:, j]
            if np.any(np.isnan(col)):
                raise EncodingError(f"categorical column {j} has missing values")

    def _inputs(self, X, fit: bool):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_input:
            raise DomainError(f"expected {self.n_input} input columns, got {X.shape[1]}")
        self._check_codes(X)
        fam = FAMILIES[self.family]
        if fam.encode:
            X, emap = one_in_k_encode(X, self.cat_sizes)
            if fit:
                self.encoding_map = emap
            if fam.self_normalizing:
                return X, {}
            if fit:
                self.state = fit_normalizer(X)
            return apply_normalizer(self.state, X), {}
        if fit:
            self.state = fit_normalizer(X, passthrough=self.cat_sizes)
        Z = apply_normalizer(self.state, X)
        pos = self.state.new_index()
        return Z, {pos[j]: k for j, k in self.cat_sizes.items() if j in pos}

    # -- fitting ----------------------------------------------------------

    def fit(self, X, y, cat_sizes=None, censored=None, censoring: str = "uncensored",
            kappa_max=None):
        """Fit on design matrix ``X`` and log10 responses ``y``.

        For censored rows ``y`` is the (log) censoring threshold.
        """
        if censoring not in CENSORING_STRATEGIES:
            raise ConfigurationError(f"unknown censoring strategy {censoring!r}")
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValueError("X must be 2-D with one row per response")
        if X.shape[0] == 0:
            raise ConfigurationError("cannot fit on an empty dataset")
        cens = np.zeros(y.size, dtype=bool) if censored is None \
            else np.asarray(censored, dtype=bool)
        if censoring in ("sh-mean", "sh-sample") and self.family != "rf":
            raise ConfigurationError("Schmee & Hahn imputation is only available for rf")
        if censoring == "drop" and cens.any():
            keep = ~cens
            if not keep.any():
                raise ConfigurationError("all runs are censored; nothing left after dropping")
            X, y, cens = X[keep], y[keep], cens[keep]
        self.n_input = X.shape[1]
        self.cat_sizes = {int(j): int(k) for j, k in (cat_sizes or {}).items()}
        Z, cats = self._inputs(X, fit=True)
        self._fit_core(Z, y, cats, cens, censoring, kappa_max)
        return self

    def fit_dataset(self, dataset, censoring: str = "uncensored", kappa_max=None):
        ds = dataset if dataset.log_response else dataset.with_log_response()
        return self.fit(ds.X, ds.y, ds.cat_sizes, ds.censored, censoring, kappa_max)

    def _fit_core(self, Z, y, cats, cens, censoring, kappa_max):
        P = self.params
        fam = self.family
        if fam == "rr":
            self.core = forward_select_two_phase(Z, y, l=P["l"], q=P["q"], eps=P["eps"],
                                                 inner_folds=min(P["inner_folds"], len(y)),
                                                 seed=self.seed)
        elif fam == "spore":
            self.core = spore_foba(Z, y, eps=P["eps"], t_max=P["t_max"], gamma=P["gamma"])
        elif fam == "nn":
            self.core = fit_mlp(Z, y, h=P["h"], alpha=P["alpha"], steps=P["steps"],
                                seed=self.seed)
        elif fam in ("gp", "pp"):
            self.y_offset = float(np.mean(y))
            mask = np.zeros(Z.shape[1], dtype=bool)
            mask[list(cats)] = True
            init = KernelParams.default(Z.shape[1], mask, noise_var=P["noise_var"])
            yc = y - self.y_offset
            if fam == "gp":
                self.core = gp_fit(Z, yc, init, opt_steps=P["opt_steps"])
            else:
                self.core = pp_fit(Z, yc, a=P["a"], h=P["h"], seed=self.seed, init=init)
        elif fam == "rt":
            tree = grow_tree(Z, y, cats, seed=self.seed)
            folds = min(P["folds"], len(y))
            if folds >= 2:
                tree = prune_tree(tree, Z, y, cats, folds=folds, seed=self.seed)
            self.core = tree
            resid = tree.predict(Z) - y
            self.residual_var = max(float(np.mean(resid**2)), 1e-6)
        elif fam == "rf":
            kw = dict(B=P["B"], perc=P["perc"], n_min=P["n_min"], var_floor=P["var_floor"],
                      seed=self.seed, n_jobs=self.n_jobs)
            if censoring in ("sh-mean", "sh-sample"):
                cfg = CensoredFitConfig(variant=censoring[3:], kappa_max=kappa_max,
                                        seed=self.seed)
                self.core = fit_forest_censored(Z, y, cens, cfg, cats, **kw)
            elif censoring == "drop":
                self.core = fit_drop_censored(Z, y, cens, cats, **kw)
            else:
                self.core = fit_pretend_uncensored(Z, y, cens, cats, **kw)
        if fam in ("rr", "spore", "nn"):
            self.residual_var = float(self.core.residual_var)
        log.info("fitted %s on %d points (%d model inputs)", fam, len(y), Z.shape[1])

    # -- prediction -------------------------------------------------------

    def predict(self, X) -> PredictiveDistribution:
        if not self.fitted:
            raise ConfigurationError("model is not fitted")
        Z, _ = self._inputs(X, fit=False)
        fam = self.family
        if fam in ("rr", "spore"):
            mean = self.core.predict(Z).mean
        elif fam == "nn":
            mean = mlp_forward(self.core, Z)
        elif fam == "gp":
            pd = gp_predict(self.core, Z)
            return PredictiveDistribution(pd.mean + self.y_offset, pd.variance)
        elif fam == "pp":
            pd = pp_predict(self.core, Z)
            return PredictiveDistribution(pd.mean + self.y_offset, pd.variance)
        elif fam == "rt":
            mean = self.core.predict(Z)
        else:
            return predict_forest(self.core, Z)
        return PredictiveDistribution(mean, np.full(mean.shape, self.residual_var))


def make_model(spec, seed: int = 0, n_jobs: int = 1) -> EPM:
    """Build an unfitted :class:`EPM` from a family name, a ``(family,
    params)`` pair, an existing EPM (copied unfitted), or a factory."""
    if isinstance(spec, EPM):
        return EPM(spec.family, dict(spec.params), seed, n_jobs)
    if isinstance(spec, str):
        return EPM(spec, {}, seed, n_jobs)
    if isinstance(spec, tuple) and len(spec) == 2:
        return EPM(spec[0], dict(spec[1]), seed, n_jobs)
    if callable(spec):
        model = spec()
        if not isinstance(model, EPM):
            raise ConfigurationError("model factory must return an EPM")
        return model
    raise ConfigurationError(f"cannot build a model from {spec!r}")


def column_cat_sizes(columns) -> dict:
    return {j: len(c.domain) for j, c in enumerate(columns) if c.kind == CATEGORICAL}
