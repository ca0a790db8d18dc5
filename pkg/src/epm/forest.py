"""Random forests whose leaves store a mean and a floored variance.

Every tree sees the full training set (no bootstrap); randomness enters
through the per-node variable subsets and the split location drawn
uniformly inside the optimal between-value interval. Per-tree predictions
are combined as an equal-weight Gaussian mixture.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import PredictiveDistribution
from .errors import ConfigurationError, DomainError
from .regtree import Tree, grow_tree


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    perc: float = 0.5
    n_min: int = 5
    var_floor: float = 0.01
    seed: int = 0

    @property
    def B(self) -> int:
        return len(self.trees)

    @property
    def n_input(self) -> int:
        return self.trees[0].n_input


def n_split_vars(p: int, perc: float) -> int:
    return max(1, int(np.floor(perc * p)))


def tree_seeds(seed, B):
    """Independent per-tree generators derived from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(B)]


def fit_forest(X, y, cat_sizes=None, B: int = 10, perc: float = 0.5, n_min: int = 5,
               var_floor: float = 0.01, seed: int = 0, n_jobs: int = 1) -> ForestModel:
    """Fit ``B`` unpruned randomized trees.

    ``y`` is either a vector or an ``(n, B)`` matrix whose column ``b`` is
    the response used by tree ``b`` (the censoring EM imputes per tree).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if B < 1:
        raise ConfigurationError("B must be >= 1")
    if not 0 < perc <= 1:
        raise ConfigurationError("perc must lie in (0, 1]")
    if n_min < 1:
        raise ConfigurationError("n_min must be >= 1")
    if not var_floor > 0:
        raise ConfigurationError("var_floor must be > 0")
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("need a non-empty 2-D design matrix")
    if y.ndim == 1:
        cols = [y] * B
    elif y.shape == (X.shape[0], B):
        cols = [y[:, b] for b in range(B)]
    else:
        raise ValueError("y must be a vector or an (n, B) matrix")
    v = n_split_vars(X.shape[1], perc)
    rngs = tree_seeds(seed, B)

    def one(b):
        return grow_tree(X, cols[b], cat_sizes, n_min=n_min, n_vars=v, seed=rngs[b],
                         random_threshold=True, var_floor=var_floor)

    if n_jobs and n_jobs > 1 and B > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            trees = list(ex.map(one, range(B)))
    else:
        trees = [one(b) for b in range(B)]
    return ForestModel(tuple(trees), perc, n_min, var_floor, seed)


def tree_outputs(model: ForestModel, X):
    """Per-tree leaf means and variances, each of shape (B, q)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_input:
        raise DomainError(f"expected {model.n_input} inputs, got {X.shape[1]}")
    mus, vs = zip(*(t.predict_with_variance(X) for t in model.trees))
    return np.array(mus), np.array(vs)


def aggregate(mus, variances):
    """Moments of the equal-weight mixture of N(mu_b, var_b) over axis 0.

    Written as mean(var_b) + mean((mu_b - mu)^2), which equals
    mean(var_b + mu_b^2) - mu^2 without its cancellation. Means are taken
    relative to the first tree so that agreeing trees reproduce their common
    value exactly.
    """
    mus = np.asarray(mus, dtype=float)
    variances = np.asarray(variances, dtype=float)
    mu = np.clip(mus[0] + (mus - mus[0]).mean(axis=0), mus.min(axis=0), mus.max(axis=0))
    var = variances[0] + (variances - variances[0]).mean(axis=0) \
        + ((mus - mu) ** 2).mean(axis=0)
    return mu, var


def predict_forest(model: ForestModel, X) -> PredictiveDistribution:
    mu, var = aggregate(*tree_outputs(model, X))
    return PredictiveDistribution(mu, var)


def single_leaf_forest(y, var_floor: float = 0.01) -> Tree:
    """Helper for tests: the tree every forest degenerates to without splits."""
    y = np.asarray(y, dtype=float)
    return grow_tree(np.zeros((y.size, 1)), y, n_min=y.size + 1, var_floor=var_floor)
