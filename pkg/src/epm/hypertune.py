"""Hyperparameter tuning with DIRECT on an inner 2-fold CV RMSE.

DIRECT searches the unit hypercube: every rectangle is represented by its
center value, the potentially optimal rectangles (lower-right convex hull
of size vs. value) are trisected along their longest sides, and the two new
centers per side are evaluated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, EPMError, OptimizationError

log = logging.getLogger(__name__)

DIRECT_EPS = 1e-4


@dataclass(frozen=True)
class HyperDim:
    name: str
    lo: float
    hi: float
    log: bool = False
    integer: bool = False

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ConfigurationError(f"empty interval for {self.name}")
        if self.log and not self.lo > 0:
            raise ConfigurationError(f"log-scale dimension {self.name} needs positive bounds")

    def from_unit(self, u: float):
        if self.log:
            v = math.exp(math.log(self.lo) + u * (math.log(self.hi) - math.log(self.lo)))
        else:
            v = self.lo + u * (self.hi - self.lo)
        if self.integer:
            return int(min(max(round(v), math.ceil(self.lo)), math.floor(self.hi)))
        return float(min(max(v, self.lo), self.hi))

    def to_unit(self, v: float) -> float:
        if self.hi == self.lo:
            return 0.5
        if self.log:
            return (math.log(v) - math.log(self.lo)) / (math.log(self.hi) - math.log(self.lo))
        return (v - self.lo) / (self.hi - self.lo)


@dataclass(frozen=True)
class HyperSpace:
    dims: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))

    @property
    def names(self):
        return [d.name for d in self.dims]

    def point(self, u) -> dict:
        return {d.name: d.from_unit(float(x)) for d, x in zip(self.dims, u)}


@dataclass
class DirectResult:
    best_point: dict
    best_value: float
    n_evals: int
    history: list = field(default_factory=list)  # (point, value) in evaluation order


def _potentially_optimal(sizes, values, eps=DIRECT_EPS):
    """Indices of rectangles on the lower-right hull of (size, value)."""
    f = np.asarray(values, dtype=float)
    finite = np.isfinite(f)
    if not finite.any():
        f = np.zeros_like(f)
    else:
        top = f[finite].max()
        f = np.where(finite, f, top + abs(top) + 1.0)
    d = np.asarray(sizes)
    f_min = f.min()
    keys = np.unique(np.round(d, 12))
    cand = []
    for k in keys:
        members = np.flatnonzero(np.round(d, 12) == k)
        cand.append(int(members[np.argmin(f[members])]))  # lowest index on ties
    chosen = []
    for j in cand:
        smaller = [i for i in cand if d[i] < d[j] - 1e-15]
        larger = [i for i in cand if d[i] > d[j] + 1e-15]
        k_low = max([(f[j] - f[i]) / (d[j] - d[i]) for i in smaller], default=0.0)
        k_high = min([(f[i] - f[j]) / (d[i] - d[j]) for i in larger], default=np.inf)
        if k_high <= 0 or max(k_low, 0.0) > k_high:
            continue
        if np.isfinite(k_high) and f[j] - k_high * d[j] > f_min - eps * abs(f_min):
            continue
        chosen.append(j)
    return chosen


def direct_minimize(f, space: HyperSpace, budget: int = 30, default: dict | None = None,
                    ) -> DirectResult:
    """Minimize ``f(point_dict)`` with at most ``budget`` evaluations.

    ``default`` (if given) is evaluated first and counts toward the budget.
    Integer dimensions are rounded and log dimensions searched in log space.
    Repeated points (possible after rounding) reuse the cached value.
    """
    if budget < 1:
        raise ConfigurationError("budget must be >= 1")
    history = []
    cache = {}

    def evaluate(point):
        key = tuple(sorted(point.items()))
        if key not in cache:
            try:
                v = float(f(point))
            except (EPMError, FloatingPointError, np.linalg.LinAlgError) as exc:
                log.debug("objective failed at %s: %s", point, exc)
                v = np.inf
            cache[key] = v if np.isfinite(v) else np.inf
        history.append((point, cache[key]))
        return cache[key]

    if default is not None:
        evaluate(dict(default))
    D = len(space.dims)
    if D and len(history) < budget:
        centers = [np.full(D, 0.5)]
        levels = [np.zeros(D, dtype=int)]  # side length of dim i is 3**-level
        values = [evaluate(space.point(centers[0]))]

        def size(lv):
            return 0.5 * float(np.linalg.norm(3.0 ** -lv))

        while len(history) < budget:
            sel = _potentially_optimal([size(lv) for lv in levels], values)
            for j in sel:
                if len(history) >= budget:
                    break
                lv = levels[j]
                long_dims = np.flatnonzero(lv == lv.min())
                delta = 3.0 ** -(lv.min() + 1)
                samples = []
                for i in long_dims:
                    pair = []
                    for sgn in (1, -1):
                        if len(history) >= budget:
                            break
                        c = centers[j].copy()
                        c[i] += sgn * delta
                        pair.append((c, evaluate(space.point(c))))
                    samples.append((i, pair))
                # split first along the dimension with the best sample
                order = sorted(range(len(samples)),
                               key=lambda s: (min([v for _, v in samples[s][1]] or [np.inf]), s))
                new_lv = lv.copy()
                for s in order:
                    i, pair = samples[s]
                    new_lv[i] += 1
                    for c, v in pair:
                        centers.append(c)
                        levels.append(new_lv.copy())
                        values.append(v)
                levels[j] = new_lv
    elif not history:
        evaluate({})

    vals = np.array([v for _, v in history])
    if not np.isfinite(vals).any():
        raise OptimizationError("objective was non-finite at every evaluated point")
    k = int(np.argmin(vals))  # first minimum, so the default wins ties
    return DirectResult(dict(history[k][0]), float(vals[k]), len(history), history)


DEFAULT_SPACES = {
    "rr": HyperSpace((HyperDim("q", 1, 40, integer=True), HyperDim("eps", 1e-6, 1.0, log=True))),
    "spore": HyperSpace((HyperDim("eps", 1e-6, 1.0, log=True),
                         HyperDim("t_max", 1, 20, integer=True),
                         HyperDim("gamma", 1e-5, 10.0, log=True))),
    "nn": HyperSpace((HyperDim("alpha", 1e-5, 10.0, log=True),
                      HyperDim("h", 1, 56, integer=True))),
    "rf": HyperSpace((HyperDim("n_min", 1, 20, integer=True), HyperDim("perc", 0.1, 1.0))),
    "rt": HyperSpace(),
    "gp": HyperSpace(),
    "pp": HyperSpace(),
}


@dataclass
class TuneResult:
    params: dict
    value: float
    default_value: float
    n_fits: int
    history: list = field(default_factory=list)


def cv2_rmse(family: str, params: dict, dataset, seed: int = 0, censoring: str = "uncensored"):
    """Mean RMSE over the two folds of a seeded 2-fold split; also returns the fit count."""
    from .evaluation import kfold_split, rmse
    from .models import make_model

    folds = kfold_split(dataset.n, 2, seed)
    errs = []
    for test in folds:
        train = np.setdiff1d(np.arange(dataset.n), test)
        model = make_model((family, params), seed=seed)
        model.fit_dataset(dataset.subset(train), censoring=censoring)
        errs.append(rmse(dataset.y[test], model.predict(dataset.X[test]).mean))
    return float(np.mean(errs)), len(folds)


def tune_model(family: str, dataset, space: HyperSpace | None = None, seed: int = 0,
               budget: int = 30, censoring: str = "uncensored") -> TuneResult:
    """Tune ``family`` on ``dataset`` (log responses) by DIRECT over ``space``."""
    from .models import FAMILIES

    if dataset.n < 2:
        raise ConfigurationError("tuning needs at least two data points")
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown model family {family!r}")
    space = DEFAULT_SPACES[family] if space is None else space
    defaults = FAMILIES[family].defaults
    default_point = {d.name: defaults[d.name] for d in space.dims}
    fits = [0]

    def objective(point):
        params = dict(defaults, **point)
        value, k = cv2_rmse(family, params, dataset, seed, censoring)
        fits[0] += k
        return value

    res = direct_minimize(objective, space, budget, default=default_point)
    return TuneResult(dict(defaults, **res.best_point), res.best_value, res.history[0][1],
                      fits[0], res.history)
