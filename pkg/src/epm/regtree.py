"""Regression trees over continuous and categorical (integer-coded) inputs.

Split search is exact: continuous variables consider every threshold between
consecutive distinct values, categorical variables the k-1 partitions that
are consecutive after sorting the present values by mean response. Trees are
stored as flat arrays; nodes are numbered in pre-order, so children always
have larger indices than their parent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _treekernels as _tk
from .errors import ConfigurationError, DomainError

TIE_RTOL = 1e-8


def partition_loss(y, left_mask) -> float:
    """Sum of squared deviations from the two region means."""
    yl = y[left_mask]
    yr = y[~left_mask]
    return float(np.sum((yl - yl.mean()) ** 2) + np.sum((yr - yr.mean()) ** 2))


def node_sse(y) -> float:
    return float(np.sum((y - y.mean()) ** 2)) if y.size else 0.0


@dataclass(frozen=True)
class Split:
    """Best split of one variable.

    Continuous: ``threshold`` with the open interval ``(lo, hi)`` between the
    two neighbouring distinct values. Categorical: ``left_values`` lists the
    present codes sent left.
    """

    loss: float
    categorical: bool
    threshold: float = np.nan
    lo: float = np.nan
    hi: float = np.nan
    left_values: tuple = ()


def _refine(y, masks_fn, fast_losses, total):
    """Re-score near-minimal candidates with the exact two-pass loss."""
    best_fast = fast_losses.min()
    tol = TIE_RTOL * (total + 1.0)
    near = np.flatnonzero(fast_losses <= best_fast + tol)
    exact = [partition_loss(y, masks_fn(i)) for i in near]
    k = int(np.argmin(exact))  # first minimum keeps the lowest candidate
    return int(near[k]), exact[k]


def best_split(x, y, categorical: bool = False, min_leaf: int = 1) -> Split | None:
    """Loss-minimizing split of one variable, or ``None`` if unsplittable."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2 * min_leaf:
        return None
    total = float(np.sum(y * y))
    if categorical:
        vals = np.unique(x)
        if vals.size < 2:
            return None
        inv = np.searchsorted(vals, x)
        cnt = np.bincount(inv, minlength=vals.size).astype(float)
        s = np.bincount(inv, weights=y, minlength=vals.size)
        s2 = np.bincount(inv, weights=y * y, minlength=vals.size)
        order = np.lexsort((vals, s / cnt))  # by mean response, ties by code
        c_cnt, c_s, c_s2 = (np.cumsum(a[order])[:-1] for a in (cnt, s, s2))
        r_cnt, r_s, r_s2 = cnt.sum() - c_cnt, s.sum() - c_s, s2.sum() - c_s2
        ok = (c_cnt >= min_leaf) & (r_cnt >= min_leaf)
        if not ok.any():
            return None
        fast = (c_s2 - c_s**2 / c_cnt) + (r_s2 - r_s**2 / r_cnt)
        fast = np.where(ok, fast, np.inf)
        idx, loss = _refine(y, lambda i: np.isin(x, vals[order[: i + 1]]), fast, total)
        left = tuple(float(v) for v in np.sort(vals[order[: idx + 1]]))
        return Split(loss=loss, categorical=True, left_values=left)

    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    cut = np.flatnonzero(xs[:-1] < xs[1:])  # left part is xs[:i+1]
    nl = cut + 1.0
    ok = (nl >= min_leaf) & (n - nl >= min_leaf)
    cut, nl = cut[ok], nl[ok]
    if cut.size == 0:
        return None
    cs, cs2 = np.cumsum(ys), np.cumsum(ys * ys)
    ls, ls2 = cs[cut], cs2[cut]
    rs, rs2 = cs[-1] - ls, cs2[-1] - ls2
    fast = (ls2 - ls**2 / nl) + (rs2 - rs**2 / (n - nl))
    k, loss = _refine(y, lambda i: x <= xs[cut[i]], fast, total)
    lo, hi = float(xs[cut[k]]), float(xs[cut[k] + 1])
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return Split(loss=loss, categorical=False, threshold=thr, lo=lo, hi=hi)


@dataclass
class Tree:
    """Flat-array binary tree; ``feature < 0`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    is_cat: np.ndarray
    cat_left: np.ndarray  # (nodes, max_k) membership of codes in the left child
    left: np.ndarray
    right: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    count: np.ndarray
    sse: np.ndarray
    n_input: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_input:
            raise DomainError(f"expected {self.n_input} inputs, got {X.shape[1]}")
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        width = self.cat_left.shape[1]
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, nd, fi = rows[inner], node[inner], f[inner]
            xv = X[r, fi]
            go_left = xv <= self.threshold[nd]
            cat = self.is_cat[nd]
            if cat.any():
                codes = xv[cat]
                valid = (codes >= 0) & (codes < width) & (codes == np.floor(codes))
                member = np.zeros(codes.shape, dtype=bool)
                ci = np.where(valid, codes, 0).astype(int)
                member[valid] = self.cat_left[nd[cat][valid], ci[valid]]
                go_left[cat] = member
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def predict(self, X) -> np.ndarray:
        return self.mean[self.apply(X)]

    def predict_with_variance(self, X):
        leaf = self.apply(X)
        return self.mean[leaf], self.var[leaf]

    def collapse(self, make_leaf) -> "Tree":
        """Copy of the tree with every node in ``make_leaf`` turned into a leaf."""
        make_leaf = np.asarray(make_leaf, dtype=bool)
        keep, stack = [], [0]
        while stack:
            t = stack.pop()
            keep.append(t)
            if self.feature[t] >= 0 and not make_leaf[t]:
                stack.append(int(self.right[t]))
                stack.append(int(self.left[t]))
        keep = np.array(keep)
        new_id = -np.ones(self.n_nodes, dtype=int)
        new_id[keep] = np.arange(keep.size)
        leafy = (self.feature[keep] < 0) | make_leaf[keep]
        feat = np.where(leafy, -1, self.feature[keep])
        left = np.where(leafy, -1, new_id[np.maximum(self.left[keep], 0)])
        right = np.where(leafy, -1, new_id[np.maximum(self.right[keep], 0)])
        return Tree(feat, self.threshold[keep], self.is_cat[keep] & ~leafy,
                    self.cat_left[keep], left, right, self.mean[keep], self.var[keep],
                    self.count[keep], self.sse[keep], self.n_input)


def _uniform_table(rng, n, p, cat_sizes):
    kmax = max([1] + [int(k) for k in cat_sizes.values()])
    return rng.random((2 * n + 1, p + 1 + kmax))


def grow_tree(X, y, cat_sizes=None, min_leaf: int = 1, n_min: int = 2, n_vars: int | None = None,
              seed=0, random_threshold: bool = False, var_floor: float | None = None) -> Tree:
    """Grow a tree by recursive best splits.

    A node becomes a leaf when it holds fewer than ``n_min`` points, its
    responses are identical, or no variable can be split. ``n_vars`` limits
    each node to a random subset of that many variables (random forests);
    further variables are drawn only while none of the subset is splittable.
    ``cat_sizes`` maps categorical column index to its number of codes.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty 2-D design matrix")
    if y.shape != (X.shape[0],):
        raise ValueError("y must have one entry per row of X")
    n, p = X.shape
    cat_sizes = {int(j): int(k) for j, k in (cat_sizes or {}).items()}
    cat_k = np.zeros(p, dtype=np.int64)
    for j, k in cat_sizes.items():
        cat_k[j] = k
        col = X[:, j]
        if np.any((col < 0) | (col >= k) | (col != np.floor(col))):
            raise DomainError(f"column {j} holds values outside its {k} categorical codes")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    U = _uniform_table(rng, n, p, cat_sizes)
    nv = p if n_vars is None else max(1, min(int(n_vars), p))
    arrays = _tk.grow(np.ascontiguousarray(X), np.ascontiguousarray(y), cat_k, float(min_leaf),
                      int(n_min), nv, bool(random_threshold),
                      -1.0 if var_floor is None else float(var_floor), U)
    return Tree(*arrays, n_input=p)


def _tree_arrays(tree: Tree):
    return (tree.feature, tree.threshold, tree.is_cat, tree.cat_left, tree.left, tree.right,
            tree.mean)


def pruning_sequence(tree: Tree):
    """Weakest-link sequence ``[(alpha_k, leafy_mask_k), ...]`` from the full
    tree (alpha 0) down to the root-only tree."""
    alpha_of = _tk.collapse_alphas(tree.feature, tree.left, tree.right, tree.sse)
    return [(float(a), (tree.feature < 0) | (alpha_of <= a)) for a in _alphas(tree, alpha_of)]


def _alphas(tree, alpha_of):
    inner = tree.feature >= 0
    vals = alpha_of[inner & np.isfinite(alpha_of)]
    return np.unique(np.concatenate([[0.0], vals]))


def prune_tree(tree: Tree, X, y, cat_sizes=None, folds: int = 10, seed: int = 0,
               min_leaf: int = 1) -> Tree:
    """Cost-complexity pruning with the complexity parameter chosen by
    ``folds``-fold cross-validated squared error (min-CV rule; ties go to the
    smaller tree)."""
    from .evaluation import kfold_split

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < folds:
        raise ConfigurationError(f"{folds}-fold pruning needs at least {folds} points")
    if tree.n_leaves == 1:
        return tree
    alpha_of = _tk.collapse_alphas(tree.feature, tree.left, tree.right, tree.sse)
    alphas = _alphas(tree, alpha_of)
    # geometric midpoint of each alpha interval; the last one stands for the root
    reps = np.append(np.sqrt(alphas[:-1] * alphas[1:]), np.inf)
    cv_err = np.zeros(reps.size)
    for f, test in enumerate(kfold_split(n, folds, seed)):
        train = np.setdiff1d(np.arange(n), test)
        sub = grow_tree(X[train], y[train], cat_sizes, min_leaf=min_leaf, seed=seed + 1 + f)
        sub_alpha = _tk.collapse_alphas(sub.feature, sub.left, sub.right, sub.sse)
        cv_err += _tk.pruned_sse(*_tree_arrays(sub), sub_alpha, np.ascontiguousarray(X[test]),
                                 y[test], reps)
    best = np.flatnonzero(cv_err <= cv_err.min() * (1 + 1e-12))
    k = int(best[-1])
    return tree.collapse((tree.feature < 0) | (alpha_of <= alphas[k]))


def predict_tree(tree: Tree, X) -> np.ndarray:
    return tree.predict(X)
