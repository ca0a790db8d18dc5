"""Response/predictor transforms, 1-in-K encoding and polynomial expansions."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import DomainError, EmptyPredictorError, EncodingError

CONSTANT_SD = 1e-12


def log_transform_response(seconds, resolution_floor: float = 0.01) -> np.ndarray:
    """log10 runtimes; values under the timer resolution count as half of it."""
    r = np.asarray(seconds, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise DomainError("runtimes must be non-negative")
    return np.log10(np.where(r < resolution_floor, resolution_floor / 2.0, r))


@dataclass(frozen=True)
class TransformState:
    """Statistics of a fitted normalizer.

    ``means``/``stddevs`` are aligned with ``kept_columns``. Columns listed in
    ``passthrough`` keep their raw values (mean 0, sd 1 is stored for them).
    """

    kept_columns: np.ndarray
    means: np.ndarray
    stddevs: np.ndarray
    n_input: int
    passthrough: frozenset = frozenset()
    encoding_map: dict = field(default_factory=dict)

    def new_index(self) -> dict[int, int]:
        return {int(j): i for i, j in enumerate(self.kept_columns)}


def fit_normalizer(X, passthrough=()) -> TransformState:
    """Drop constant columns and learn z-score statistics for the rest.

    Missing entries (NaN) are ignored for the statistics. Sample (n-1)
    standard deviation; fewer than two observed values counts as constant.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyPredictorError("cannot fit a normalizer on an empty matrix")
    passthrough = frozenset(int(j) for j in passthrough)
    kept, means, sds = [], [], []
    for j in range(X.shape[1]):
        col = X[:, j]
        obs = col[~np.isnan(col)]
        if obs.size < 2:
            continue
        if j in passthrough:
            if np.all(obs == obs[0]):
                continue
            kept.append(j)
            means.append(0.0)
            sds.append(1.0)
            continue
        sd = float(np.std(obs, ddof=1))
        if not sd > CONSTANT_SD:
            continue
        kept.append(j)
        means.append(float(np.mean(obs)))
        sds.append(sd)
    if not kept:
        raise EmptyPredictorError("all predictor columns are constant")
    return TransformState(
        kept_columns=np.array(kept, dtype=int),
        means=np.array(means),
        stddevs=np.array(sds),
        n_input=X.shape[1],
        passthrough=passthrough,
    )


def apply_normalizer(state: TransformState, X) -> np.ndarray:
    """Apply training statistics; missing entries become 0 (the training mean)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != state.n_input:
        raise DomainError(f"expected {state.n_input} columns, got {X.shape[1]}")
    Z = (X[:, state.kept_columns] - state.means) / state.stddevs
    return np.where(np.isnan(Z), 0.0, Z)


def one_in_k_encode(X, cat_sizes: dict[int, int]):
    """Replace each categorical column (integer codes) by K indicator columns.

    Returns ``(X_encoded, encoding_map)`` where ``encoding_map`` maps each
    original categorical column to the list of its indicator columns. Numeric
    columns are copied unchanged, in their original relative order.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    blocks, encoding_map, out_col = [], {}, 0
    for j in range(X.shape[1]):
        col = X[:, j]
        if j not in cat_sizes:
            blocks.append(col[:, None])
            out_col += 1
            continue
        k = int(cat_sizes[j])
        codes = np.where(np.isnan(col), -1, col).astype(int)
        bad = (np.isnan(col)) | (codes != col) | (codes < 0) | (codes >= k)
        if np.any(bad):
            raise EncodingError(
                f"column {j}: value {col[bad][0]!r} outside categorical domain of size {k}"
            )
        block = np.zeros((X.shape[0], k))
        block[np.arange(X.shape[0]), codes] = 1.0
        blocks.append(block)
        encoding_map[j] = list(range(out_col, out_col + k))
        out_col += k
    if not blocks:
        return np.zeros((X.shape[0], 0)), encoding_map
    return np.hstack(blocks), encoding_map


def encode_space(space, X):
    """1-in-K encode the parameter columns of ``X`` as declared by ``space``.

    Parameter columns come first in assembled datasets, so column ``j`` of the
    space maps to column ``j`` of ``X``.
    """
    cat_sizes = {j: len(p.domain) for j, p in enumerate(space.params) if p.is_categorical}
    return one_in_k_encode(X, cat_sizes)


def quadratic_terms(p: int) -> list[tuple[int, int]]:
    """Index pairs (j, l), j <= l, in the order used by :func:`quadratic_expand`."""
    return [(j, l) for j in range(p) for l in range(j, p)]


def quadratic_expand(X) -> np.ndarray:
    """Append every pairwise product ``x_j * x_l`` (j <= l) to ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    pairs = quadratic_terms(X.shape[1])
    prods = np.empty((X.shape[0], len(pairs)))
    for c, (j, l) in enumerate(pairs):
        prods[:, c] = X[:, j] * X[:, l]
    return np.hstack([X, prods])


def cubic_terms(S, r) -> list[tuple]:
    """Monomials over ``S + {r}`` of total degree <= 3 that contain ``r``.

    A monomial is a sorted tuple of variable ids with repetition, e.g.
    ``(a, a, b)`` for a^2 b.
    """
    S = set(S)
    if r in S:
        raise ValueError("r must not already be in S")
    try:
        variables = sorted(S | {r})
    except TypeError:
        variables = sorted(S | {r}, key=repr)
    terms = []
    for degree in (1, 2, 3):
        for mono in combinations_with_replacement(variables, degree):
            if r in mono:
                terms.append(mono)
    return terms


def monomial_values(X, term) -> np.ndarray:
    """Evaluate the product of the columns named by ``term``."""
    X = np.asarray(X, dtype=float)
    out = np.ones(X.shape[0])
    for j in term:
        out = out * X[:, j]
    return out
