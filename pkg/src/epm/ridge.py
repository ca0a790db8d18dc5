"""Ridge regression and its two feature-selection variants.

* :func:`forward_select_two_phase` (RR): greedy forward selection of linear
  inputs, quadratic expansion of the winners, second forward selection.
* :func:`spore_foba`: single forward pass whose steps are forward-backward
  phases over the cubic candidate terms of one raw feature.

Both variants append an unpenalized intercept that is never subject to
selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import PredictiveDistribution
from .errors import ConfigurationError, DomainError, SingularMatrixError
from .evaluation import kfold_split
from .preprocess import (
    TransformState,
    apply_normalizer,
    cubic_terms,
    fit_normalizer,
    monomial_values,
    quadratic_terms,
)

RESIDUAL_VAR_FLOOR = 1e-6


def fit_ridge(X, y, eps: float) -> np.ndarray:
    """Weights ``(X^T X + eps I)^-1 X^T y`` via a Cholesky solve."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("need at least one row")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    A = X.T @ X
    A[np.diag_indices_from(A)] += eps
    try:
        c = scipy.linalg.cho_factor(A, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("X^T X + eps I is singular") from None
    if eps == 0 and np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularMatrixError("X^T X is singular and eps = 0")
    return scipy.linalg.cho_solve(c, X.T @ y, check_finite=False)


def _solve_with_intercept(G, b, eps):
    """Solve the Gram system whose first row/column is the intercept."""
    A = G.copy()
    A[np.arange(1, len(A)), np.arange(1, len(A))] += eps
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, b, rcond=None)[0]


@dataclass(frozen=True)
class RidgeModel:
    """Linear model over (possibly polynomial) terms of the inputs.

    ``terms`` are tuples of post-normalizer column indices. With ``base ==
    "raw"`` term values are products of the de-normalized (mean-imputed)
    inputs and are then standardized by ``term_means``/``term_sds``;
    ``base == "normalized"`` multiplies the z-scored inputs directly.
    ``state=None`` means the inputs are used as given.
    """

    weights: np.ndarray
    terms: tuple
    epsilon: float = 0.0
    intercept: float = 0.0
    state: TransformState | None = None
    base: str = "normalized"
    term_means: np.ndarray | None = None
    term_sds: np.ndarray | None = None
    residual_var: float = RESIDUAL_VAR_FLOOR
    n_input: int | None = None
    n_expanded: int = 0

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "terms", tuple(tuple(t) for t in self.terms))
        if len(self.weights) != len(self.terms):
            raise ValueError("one weight per selected term is required")

    @classmethod
    def linear(cls, weights, intercept: float = 0.0) -> "RidgeModel":
        w = np.asarray(weights, dtype=float)
        return cls(weights=w, terms=tuple((j,) for j in range(len(w))), intercept=intercept,
                   n_input=len(w))

    def term_matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        expected = self.state.n_input if self.state is not None else self.n_input
        if expected is not None and X.shape[1] != expected:
            raise DomainError(f"expected {expected} input columns, got {X.shape[1]}")
        if self.state is not None:
            Z = apply_normalizer(self.state, X)
            base = Z * self.state.stddevs + self.state.means if self.base == "raw" else Z
        else:
            base = X
        T = np.column_stack([monomial_values(base, t) for t in self.terms]) if self.terms \
            else np.zeros((X.shape[0], 0))
        if self.term_means is not None:
            T = (T - self.term_means) / self.term_sds
        return T

    def predict(self, X) -> PredictiveDistribution:
        mean = self.term_matrix(X) @ self.weights + self.intercept
        return PredictiveDistribution(mean, np.full(mean.shape, self.residual_var))


def predict_ridge(model: RidgeModel, X) -> PredictiveDistribution:
    return model.predict(X)


def _fit_terms(T, y, eps):
    """Fit intercept + weights on term matrix ``T``; return (w, b0, resid_var)."""
    n = T.shape[0]
    D = np.hstack([np.ones((n, 1)), T])
    coef = _solve_with_intercept(D.T @ D, D.T @ y, eps)
    resid = y - D @ coef
    return coef[1:], float(coef[0]), max(float(np.mean(resid**2)), RESIDUAL_VAR_FLOOR)


class _CVGram:
    """Per-fold Gram matrices of ``[1, Z]`` for fast inner-CV ridge scoring."""

    def __init__(self, Z, y, folds, eps):
        D = np.hstack([np.ones((Z.shape[0], 1)), Z])
        G_all, b_all = D.T @ D, D.T @ y
        self.eps = eps
        self.parts = []
        for idx in folds:
            V = D[idx]
            self.parts.append((G_all - V.T @ V, b_all - V.T @ y[idx], V, y[idx]))
        self.n = len(y)

    def rmse(self, cols) -> float:
        idx = np.concatenate([[0], np.asarray(cols, dtype=int) + 1])
        sse = 0.0
        for G, b, V, yv in self.parts:
            w = _solve_with_intercept(G[np.ix_(idx, idx)], b[idx], self.eps)
            r = yv - V[:, idx] @ w
            sse += float(r @ r)
        return float(np.sqrt(sse / self.n))


def _greedy_forward(Z, y, k, eps, folds) -> list[int]:
    cv = _CVGram(Z, y, folds, eps)
    selected: list[int] = []
    remaining = list(range(Z.shape[1]))
    for _ in range(min(k, Z.shape[1])):
        scores = [cv.rmse(selected + [c]) for c in remaining]
        best = int(np.argmin(scores))  # first minimum = lowest column index
        selected.append(remaining.pop(best))
    return selected


def forward_select_two_phase(X, y, l: int = 30, q: int = 20, eps: float = 1e-3,
                             inner_folds: int = 5, seed: int = 0) -> RidgeModel:
    """Ridge regression variant RR (two-phase forward selection)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n < inner_folds:
        raise ConfigurationError(f"{inner_folds}-fold inner CV needs >= {inner_folds} rows")
    if l < 1 or q < 1:
        raise ConfigurationError("l and q must be >= 1")
    folds = kfold_split(n, inner_folds, seed)
    state = fit_normalizer(X)
    Z = apply_normalizer(state, X)
    linear = _greedy_forward(Z, y, l, eps, folds)

    # Quadratic expansion of the selected inputs only, on the unnormalized
    # (mean-imputed) values, then standardized again.
    raw = Z * state.stddevs + state.means
    pairs = quadratic_terms(len(linear))
    cand = [(linear[a],) for a in range(len(linear))]
    cand += [tuple(sorted((linear[a], linear[b]))) for a, b in pairs]
    E = np.column_stack([monomial_values(raw, t) for t in cand])
    e_means = E.mean(axis=0)
    e_sds = E.std(axis=0, ddof=1) if n > 1 else np.zeros(E.shape[1])
    usable = np.flatnonzero(e_sds > 1e-12)
    cand = [cand[i] for i in usable]
    En = (E[:, usable] - e_means[usable]) / e_sds[usable]
    chosen = _greedy_forward(En, y, q, eps, folds)

    w, b0, rv = _fit_terms(En[:, chosen], y, eps)
    return RidgeModel(
        weights=w,
        terms=tuple(cand[i] for i in chosen),
        epsilon=eps,
        intercept=b0,
        state=state,
        base="raw",
        term_means=e_means[usable][chosen],
        term_sds=e_sds[usable][chosen],
        residual_var=rv,
        n_expanded=E.shape[1],
    )


class _TermFitter:
    """Training-set RMSE of intercept + ridge over a set of monomials."""

    def __init__(self, Z, y, eps):
        self.Z, self.y, self.eps = Z, y, eps
        self._cols: dict = {}
        self._memo: dict = {}

    def column(self, term):
        if term not in self._cols:
            self._cols[term] = monomial_values(self.Z, term)
        return self._cols[term]

    def rmse(self, terms) -> float:
        key = frozenset(terms)
        if key not in self._memo:
            T = np.column_stack([self.column(t) for t in terms]) if terms \
                else np.zeros((len(self.y), 0))
            w, b0, _ = _fit_terms(T, self.y, self.eps)
            r = self.y - (T @ w + b0)
            self._memo[key] = float(np.sqrt(np.mean(r**2)))
        return self._memo[key]


def _foba_phase(fitter, T, candidates, gamma, t_max, max_rounds=100):
    T = list(T)
    cur = fitter.rmse(T)
    for _ in range(max_rounds):
        avail = [t for t in candidates if t not in T]
        if not avail or len(T) >= t_max:
            break
        scores = [fitter.rmse(T + [t]) for t in avail]
        k = int(np.argmin(scores))
        if not cur - scores[k] > gamma:
            break
        T.append(avail[k])
        cur = scores[k]
        if len(T) > 1:
            drops = [fitter.rmse(T[:i] + T[i + 1:]) for i in range(len(T))]
            i = int(np.argmin(drops))
            if drops[i] - cur < 0.5 * gamma:
                del T[i]
                cur = drops[i]
    return T, cur


def spore_foba(X, y, eps: float = 1e-3, t_max: int = 10, gamma: float = 0.01) -> RidgeModel:
    """SPORE-FoBa: sparse cubic polynomial ridge regression."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    state = fit_normalizer(X)
    Z = apply_normalizer(state, X)
    p = Z.shape[1]
    fitter = _TermFitter(Z, y, eps)

    T: list = []
    S: set = set()
    cur = fitter.rmse(T)
    while len(T) < t_max:
        best = None
        for r in range(p):
            if r in S:
                continue
            Tr, val = _foba_phase(fitter, T, cubic_terms(S, r), gamma, t_max)
            if Tr != T and (best is None or val < best[2]):
                best = (r, Tr, val)
        if best is None or not best[2] < cur:
            break
        r, T, cur = best
        S.add(r)

    T_mat = np.column_stack([fitter.column(t) for t in T]) if T else np.zeros((len(y), 0))
    w, b0, rv = _fit_terms(T_mat, y, eps)
    return RidgeModel(weights=w, terms=tuple(T), epsilon=eps, intercept=b0, state=state,
                      base="normalized", residual_var=rv)
