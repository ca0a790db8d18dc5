"""Solver-independent TSP instance features.

Groups: problem size and cost statistics, minimum spanning tree, cluster
(bottleneck) distances, 2-opt probing, random-walk ruggedness, and node
distribution. Every group's wall-clock time is reported as a feature too.
Probing uses nearest-neighbour construction plus 2-opt descent, so those
feature names carry a ``_2opt`` suffix.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import ndimage

from ..errors import DomainError
from .instance import TspInstance

IMPROVE_TOL = 1e-10
NORM_EXTENT = 400.0
CELL = 40.0


def stats3(v):
    """(mean, variation coefficient, skew); vc uses the sample sd and skew the
    population third standardized moment. Degenerate cases give 0, where a
    spread below 1e-12 of the values' magnitude counts as constant."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("stats3 needs at least one value")
    mean = float(v.mean())
    if v.size == 1 or np.ptp(v) <= 1e-12 * float(np.max(np.abs(v))):
        return mean, 0.0, 0.0
    sd = float(v.std(ddof=1))
    vc = sd / mean if mean != 0 else 0.0
    c = v - mean
    m2 = float(np.mean(c * c))
    skew = float(np.mean(c**3)) / m2**1.5
    if abs(skew) < 1e-12:
        skew = 0.0
    return mean, vc, skew


def _upper(C):
    return C[np.triu_indices(C.shape[0], 1)]


def cost_matrix_features(inst: TspInstance):
    return stats3(_upper(inst.costs))


def minimum_spanning_tree(C):
    """Prim's algorithm on a dense matrix.

    Returns the edges ``(parent, child, cost)`` in insertion order and the
    bottleneck (minimax path) distance matrix. When node ``v`` joins via
    parent ``u`` with edge cost ``w``, its bottleneck to every earlier node
    ``x`` is ``max(B[u, x], w)``.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = C[0].copy()
    parent = np.zeros(n, dtype=int)
    in_tree[0] = True
    best[0] = np.inf
    order = [0]
    edges = []
    B = np.zeros((n, n))
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        v = int(np.argmin(cand))
        u = int(parent[v])
        w = float(C[u, v])
        prev = np.array(order)
        B[v, prev] = np.maximum(B[u, prev], w)
        B[prev, v] = B[v, prev]
        edges.append((u, v, w))
        in_tree[v] = True
        order.append(v)
        closer = (~in_tree) & (C[v] < best)
        best[closer] = C[v, closer]
        parent[closer] = v
    return edges, B


def mst_features(inst: TspInstance):
    edges, _ = minimum_spanning_tree(inst.costs)
    w = np.array([e[2] for e in edges])
    deg = np.zeros(inst.n)
    for u, v, _ in edges:
        deg[u] += 1
        deg[v] += 1
    return (float(w.sum()), *stats3(w), *stats3(deg))


def cluster_distance_features(inst: TspInstance):
    _, B = minimum_spanning_tree(inst.costs)
    return stats3(_upper(B))


# -- tours -------------------------------------------------------------------

def tour_cost(C, tour) -> float:
    t = np.asarray(tour)
    return float(np.sum(C[t, np.roll(t, -1)]))


def nearest_neighbour_tour(C, start: int):
    n = C.shape[0]
    tour = [start]
    free = np.ones(n, dtype=bool)
    free[start] = False
    for _ in range(n - 1):
        d = np.where(free, C[tour[-1]], np.inf)
        nxt = int(np.argmin(d))
        tour.append(nxt)
        free[nxt] = False
    return np.array(tour)


def _move_deltas(C, t, i):
    """Gains of all 2-opt moves that remove edge (t[i], t[i+1])."""
    n = t.size
    j = np.arange(i + 2, n if i > 0 else n - 1)
    a, b = t[i], t[i + 1]
    c, e = t[j], t[(j + 1) % n]
    return j, C[a, c] + C[b, e] - C[a, b] - C[c, e]


def two_opt_descent(C, tour, max_moves: int = 1000, offset: int = 0):
    """First-improvement 2-opt; returns (tour, cost, accepted moves).

    Scanning starts at position ``offset`` and wraps around; the descent
    stops at a local minimum or after ``max_moves`` accepted moves.
    """
    t = np.array(tour)
    n = t.size
    moves = 0
    since = 0  # positions scanned since the last improvement
    i = offset % n
    while moves < max_moves and since < n:
        if i <= n - 3:
            js, d = _move_deltas(C, t, i)
            hit = np.flatnonzero(d < -IMPROVE_TOL)
            if hit.size:
                j = int(js[hit[0]])
                t[i + 1: j + 1] = t[i + 1: j + 1][::-1].copy()
                moves += 1
                since = 0
                continue
        since += 1
        i = (i + 1) % n
    return t, tour_cost(C, t), moves


def is_two_opt_optimal(C, tour, tol: float = IMPROVE_TOL) -> bool:
    t = np.asarray(tour)
    for i in range(t.size - 2):
        _, d = _move_deltas(C, t, i)
        if np.any(d < -tol):
            return False
    return True


def tour_edges(tour) -> set:
    t = list(tour)
    return {tuple(sorted((t[k], t[(k + 1) % len(t)]))) for k in range(len(t))}


def local_search_probe(inst: TspInstance, runs: int = 20, steps: int = 1000, seed=0):
    """18 probing features from ``runs`` nearest-neighbour + 2-opt descents."""
    if inst.n < 4:
        raise DomainError("2-opt probing needs at least 4 nodes")
    rng = np.random.default_rng(seed)
    C = inst.costs
    nn_costs, finals, improve, nsteps, minima = [], [], [], [], []
    for _ in range(runs):
        start = int(rng.integers(inst.n))
        offset = int(rng.integers(inst.n))
        t0 = nearest_neighbour_tour(C, start)
        c0 = tour_cost(C, t0)
        t, c, k = two_opt_descent(C, t0, steps, offset)
        nn_costs.append(c0)
        finals.append(c)
        improve.append((c0 - c) / k if k else 0.0)
        nsteps.append(k)
        minima.append(tour_edges(t))
    hamming = [len(a - b) for a, b in combinations(minima, 2)] or [0]
    counts: dict = {}
    for es in minima:
        for e in es:
            counts[e] = counts.get(e, 0) + 1
    freq = np.array(list(counts.values()), dtype=float) / len(minima)
    out = []
    for v in (nn_costs, finals, improve, nsteps, hamming, freq):
        out.extend(stats3(v))
    return tuple(out)


def autocorrelation_coefficient(inst: TspInstance, walk_len: int = 2000, seed=0) -> float:
    """Lag-1 autocorrelation of tour costs along a random 2-opt walk."""
    if inst.n < 4:
        raise DomainError("2-opt walks need at least 4 nodes")
    rng = np.random.default_rng(seed)
    C = inst.costs
    n = inst.n
    t = rng.permutation(n)
    cost = tour_cost(C, t)
    series = np.empty(walk_len)
    for s in range(walk_len):
        while True:
            i, j = np.sort(rng.choice(n, size=2, replace=False))
            if j - i >= 2 and not (i == 0 and j == n - 1):
                break
        a, b, c, e = t[i], t[i + 1], t[j], t[(j + 1) % n]
        cost += C[a, c] + C[b, e] - C[a, b] - C[c, e]
        t[i + 1: j + 1] = t[i + 1: j + 1][::-1].copy()
        series[s] = cost
    x, y = series[:-1], series[1:]
    if np.ptp(x) <= 1e-12 * max(1.0, abs(cost)) or np.ptp(y) <= 1e-12 * max(1.0, abs(cost)):
        return 0.0
    r = float(np.corrcoef(x, y)[0, 1])
    return float(np.clip(r, -1.0, 1.0)) if np.isfinite(r) else 0.0


# -- node distribution ---------------------------------------------------------

def normalize_coords(P):
    """Translate to the origin and scale uniformly so the larger extent is 400."""
    P = np.asarray(P, dtype=float)
    lo = P.min(axis=0)
    extent = float(np.max(P.max(axis=0) - lo))
    if not extent > 0:
        raise DomainError("all nodes coincide; coordinates cannot be normalized")
    return (P - lo) * (NORM_EXTENT / extent)


def grid_clusters(Q, cell: float = CELL):
    """Clusters of 8-connected grid cells holding >= 2 points.

    Returns (cluster sizes in points, number of outlier points).
    """
    cells = int(np.ceil(NORM_EXTENT / cell))
    ij = np.minimum((Q // cell).astype(int), cells - 1)
    occ = np.zeros((cells, cells), dtype=int)
    np.add.at(occ, (ij[:, 0], ij[:, 1]), 1)
    dense = occ >= 2
    labels, k = ndimage.label(dense, structure=np.ones((3, 3), dtype=int))
    sizes = [int(occ[labels == c].sum()) for c in range(1, k + 1)]
    outliers = int(np.sum(occ == 1))
    return sizes, outliers


def node_distribution_features(inst: TspInstance):
    if inst.coords is None:
        raise DomainError("node distribution features need coordinates")
    Q = normalize_coords(inst.coords)
    n = inst.n
    diff = Q[:, None, :] - Q[None, :, :]
    D = np.sqrt(np.sum(diff * diff, axis=2))
    d = _upper(D)
    sd = float(np.std(d, ddof=1)) if d.size > 1 else 0.0
    fracs = [np.unique(np.round(d, k)).size / d.size for k in (1, 2, 3, 4)]
    centroid = Q.mean(axis=0)
    to_centroid = float(np.mean(np.sqrt(np.sum((Q - centroid) ** 2, axis=1))))
    ext = Q.max(axis=0) - Q.min(axis=0)
    area = float(ext[0] * ext[1])
    Dn = D + np.diag(np.full(n, np.inf))
    nnd = Dn.min(axis=1)
    nnd_sd = float(np.std(nnd, ddof=1))
    nnd_mean = float(nnd.mean())
    nnd_vc = nnd_sd / nnd_mean if nnd_sd > 0 and nnd_mean > 0 else 0.0
    sizes, outliers = grid_clusters(Q)
    size_vc = stats3(sizes)[1] if sizes else 0.0
    return (sd, *fracs, float(centroid[0]), float(centroid[1]), to_centroid, area, nnd_sd,
            nnd_vc, len(sizes) / n, outliers / n, size_vc)


# -- assembly -------------------------------------------------------------------

S3 = ("mean", "vc", "skew")

GROUP_FEATURES = {
    "size_cost": ["n"] + [f"cost_{s}" for s in S3],
    "mst": ["mst_sum"] + [f"mst_cost_{s}" for s in S3] + [f"mst_degree_{s}" for s in S3],
    "cluster": [f"cluster_dist_{s}" for s in S3],
    "probing": [f"{q}_{s}_2opt" for q in ("nn_tour_cost", "ls_tour_cost", "ls_improvement",
                                          "ls_steps", "ls_hamming", "ls_edge_freq")
                for s in S3],
    "ruggedness": ["autocorrelation_2opt"],
    "node_dist": ["nd_cost_sd", "nd_distinct_1dp", "nd_distinct_2dp", "nd_distinct_3dp",
                  "nd_distinct_4dp", "nd_centroid_x", "nd_centroid_y", "nd_centroid_dist_mean",
                  "nd_area", "nd_nnd_sd", "nd_nnd_vc", "nd_clusters_per_node",
                  "nd_outliers_per_node", "nd_cluster_size_vc"],
}
GROUPS = tuple(GROUP_FEATURES)
FEATURE_NAMES = tuple([f for g in GROUPS for f in GROUP_FEATURES[g]]
                      + [f"time_{g}" for g in GROUPS])


@dataclass(frozen=True)
class FeatureRow:
    names: tuple
    values: np.ndarray
    timings: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))


def extract_all(inst: TspInstance, seed=0, probe_runs: int = 20, probe_steps: int = 1000,
                walk_len: int = 2000) -> FeatureRow:
    """All feature groups plus per-group wall-clock times (seconds).

    Coordinate-free instances get NaN for the node distribution group.
    """
    probe_seed, walk_seed = np.random.SeedSequence(seed).spawn(2)
    fns = {
        "size_cost": lambda: (float(inst.n), *cost_matrix_features(inst)),
        "mst": lambda: mst_features(inst),
        "cluster": lambda: cluster_distance_features(inst),
        "probing": lambda: local_search_probe(inst, probe_runs, probe_steps,
                                              np.random.default_rng(probe_seed)),
        "ruggedness": lambda: (autocorrelation_coefficient(
            inst, walk_len, np.random.default_rng(walk_seed)),),
        "node_dist": lambda: (node_distribution_features(inst) if inst.coords is not None
                              else (np.nan,) * len(GROUP_FEATURES["node_dist"])),
    }
    values, timings = [], {}
    for g in GROUPS:
        t0 = time.perf_counter()
        out = fns[g]()
        timings[g] = max(time.perf_counter() - t0, 0.0)
        values.extend(out)
    values.extend(timings[g] for g in GROUPS)
    return FeatureRow(FEATURE_NAMES, np.array(values, dtype=float), timings)
