import math
from itertools import combinations, permutations

import numpy as np
import pytest
from scipy import stats

from epm.errors import DomainError, ParseError
from epm.tsp import FEATURE_NAMES, TspInstance, extract_all, parse_coord_csv, parse_tsplib, stats3
from epm.tsp.features import (
    autocorrelation_coefficient,
    cluster_distance_features,
    cost_matrix_features,
    is_two_opt_optimal,
    local_search_probe,
    minimum_spanning_tree,
    mst_features,
    nearest_neighbour_tour,
    node_distribution_features,
    tour_cost,
    two_opt_descent,
)

TRIANGLE = TspInstance.from_coords([[0, 0], [3, 0], [0, 4]])


def _random_inst(n, seed):
    return TspInstance.from_coords(np.random.default_rng(seed).uniform(0, 100, (n, 2)))


def test_stats3_examples():
    assert stats3([2, 2, 2]) == (2.0, 0.0, 0.0)
    assert stats3([1, 2, 3]) == (2.0, 0.5, 0.0)
    m, vc, sk = stats3([0, 0, 3])
    assert m == 1.0 and abs(vc - math.sqrt(3)) < 1e-12
    assert abs(sk - stats.skew([0, 0, 3])) < 1e-12 and abs(sk - 0.70711) < 1e-5
    assert stats3([5.0]) == (5.0, 0.0, 0.0)


def test_cost_features_triangles():
    eq = TspInstance.from_coords([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
    m, vc, sk = cost_matrix_features(eq)
    assert abs(m - 1) < 1e-12 and vc == 0.0 and sk == 0.0
    assert cost_matrix_features(TspInstance(np.ones((3, 3)) - np.eye(3))) == (1.0, 0.0, 0.0)
    m, vc, sk = cost_matrix_features(TRIANGLE)
    # independent recomputation: sample sd of (3, 4, 5) is 1
    assert m == 4.0 and abs(vc - np.std([3, 4, 5], ddof=1) / 4) < 1e-12 and vc == 0.25
    assert sk == 0.0


def test_mst_triangle():
    s, mean, vc, sk, dmean, dvc, dsk = mst_features(TRIANGLE)
    assert s == 7.0 and mean == 3.5
    assert abs(dmean - 4 / 3) < 1e-12
    edges, _ = minimum_spanning_tree(TRIANGLE.costs)
    assert len(edges) == 2


def test_mst_collinear_path():
    n = 7
    inst = TspInstance.from_coords([[i, 0] for i in range(n)])
    s, *_, dmean, _, _ = mst_features(inst)
    assert s == n - 1 and abs(dmean - 2 * (n - 1) / n) < 1e-12


def _spanning_trees(n):
    E = list(combinations(range(n), 2))
    for es in combinations(E, n - 1):
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                a = parent[a]
            return a

        ok = True
        for u, v in es:
            ru, rv = find(u), find(v)
            if ru == rv:
                ok = False
                break
            parent[ru] = rv
        if ok:
            yield es


def _bottleneck_brute(C):
    n = C.shape[0]
    B = np.full((n, n), np.inf)
    np.fill_diagonal(B, 0)
    for s in range(n):
        for t in range(s + 1, n):
            others = [k for k in range(n) if k not in (s, t)]
            for r in range(len(others) + 1):
                for mid in permutations(others, r):
                    path = (s, *mid, t)
                    b = max(C[path[k], path[k + 1]] for k in range(len(path) - 1))
                    B[s, t] = B[t, s] = min(B[s, t], b)
    return B


@pytest.mark.parametrize("n,seed", [(3, 0), (4, 1), (5, 2), (6, 3), (7, 4)])
def test_mst_and_bottleneck_against_brute_force(n, seed):
    C = _random_inst(n, seed).costs
    edges, B = minimum_spanning_tree(C)
    best = min(sum(C[u, v] for u, v in t) for t in _spanning_trees(n))
    assert abs(sum(e[2] for e in edges) - best) < 1e-9
    if n <= 6:
        np.testing.assert_allclose(B, _bottleneck_brute(C), atol=1e-12)
    assert np.all(B <= C + 1e-12)


def test_bottleneck_triangle_and_equal_costs():
    _, B = minimum_spanning_tree(TRIANGLE.costs)
    assert B[1, 2] == 4.0
    C = np.ones((5, 5)) - np.eye(5)
    m, vc, _ = cluster_distance_features(TspInstance(C))
    assert m == 1.0 and vc == 0.0


@pytest.mark.parametrize("n", [4, 5, 6, 7, 8])
def test_two_opt_terminal_tours_are_locally_optimal(n):
    rng = np.random.default_rng(n)
    for rep in range(5):
        C = _random_inst(n, 10 * n + rep).costs
        t0 = rng.permutation(n)
        t, c, k = two_opt_descent(C, t0, max_moves=10_000, offset=rep)
        assert sorted(t) == list(range(n))
        assert abs(c - tour_cost(C, t)) < 1e-9
        # exhaustive check of every 2-opt neighbour
        for i in range(n - 1):
            for j in range(i + 2, n):
                nb = t.copy()
                nb[i + 1: j + 1] = nb[i + 1: j + 1][::-1]
                assert tour_cost(C, nb) >= c - 1e-9
        assert is_two_opt_optimal(C, t)


def test_two_opt_cost_strictly_decreases():
    C = _random_inst(30, 5).costs
    t = np.arange(30)
    prev = tour_cost(C, t)
    for _ in range(50):
        t, c, k = two_opt_descent(C, t, max_moves=1)
        if k == 0:
            break
        assert c < prev
        prev = c


def test_probe_on_square():
    sq = TspInstance.from_coords([[0, 0], [1, 0], [1, 1], [0, 1]])
    tour = nearest_neighbour_tour(sq.costs, 0)
    assert is_two_opt_optimal(sq.costs, tour)
    f = local_search_probe(sq, runs=5, steps=100, seed=0)
    names = [n for n in FEATURE_NAMES if n.endswith("_2opt") and n.startswith(("nn_", "ls_"))]
    d = dict(zip(names, f))
    assert d["ls_steps_mean_2opt"] == 0 and d["ls_improvement_mean_2opt"] == 0
    assert (d["ls_hamming_mean_2opt"], d["ls_hamming_vc_2opt"], d["ls_hamming_skew_2opt"]) == (0, 0, 0)
    assert d["ls_edge_freq_mean_2opt"] == 1.0
    assert len(f) == 18


def test_probe_deterministic_and_small_instances():
    inst = _random_inst(25, 6)
    assert local_search_probe(inst, seed=4) == local_search_probe(inst, seed=4)
    with pytest.raises(DomainError):
        local_search_probe(TRIANGLE)
    with pytest.raises(DomainError):
        autocorrelation_coefficient(TRIANGLE)


def test_autocorrelation():
    C = np.ones((8, 8)) - np.eye(8)
    assert autocorrelation_coefficient(TspInstance(C), walk_len=200) == 0.0
    rng = np.random.default_rng(9)
    centers = rng.uniform(0, 1000, (5, 2))
    pts = np.vstack([c + rng.normal(0, 20, (20, 2)) for c in centers])
    r = autocorrelation_coefficient(TspInstance.from_coords(pts), walk_len=2000, seed=1)
    assert 0.5 < r <= 1.0
    for s in range(3):
        assert -1 <= autocorrelation_coefficient(_random_inst(10, s), 300, s) <= 1


def test_node_distribution_square():
    sq = TspInstance.from_coords([[0, 0], [5, 0], [5, 5], [0, 5]])
    f = node_distribution_features(sq)
    assert (f[5], f[6]) == (200.0, 200.0)
    assert f[8] == 160000.0
    assert f[1] <= f[2] <= f[3] <= f[4]


def test_node_distribution_degenerate_and_missing():
    same = TspInstance.from_coords([[1, 1]] * 4)
    with pytest.raises(DomainError):
        node_distribution_features(same)
    C = np.ones((4, 4)) - np.eye(4)
    with pytest.raises(DomainError):
        node_distribution_features(TspInstance(C))
    row = extract_all(TspInstance(C), probe_runs=2, walk_len=50)
    nd = [v for k, v in row.as_dict().items() if k.startswith("nd_")]
    assert all(math.isnan(v) for v in nd)


def test_node_distribution_scale_invariant():
    P = np.random.default_rng(3).uniform(0, 10, (30, 2))
    a = np.array(node_distribution_features(TspInstance.from_coords(P)))
    b = np.array(node_distribution_features(TspInstance.from_coords(P * 37.5)))
    np.testing.assert_allclose(a[[0, 5, 6, 7, 8, 9, 10, 11, 12, 13]],
                               b[[0, 5, 6, 7, 8, 9, 10, 11, 12, 13]], rtol=1e-9)


def test_clusters_counted_on_grid():
    # two tight groups plus one far-away singleton
    P = np.array([[0, 0], [1, 1], [2, 0], [398, 398], [399, 399], [400, 397], [0, 399]])
    f = node_distribution_features(TspInstance.from_coords(P))
    assert abs(f[11] - 2 / 7) < 1e-12 and abs(f[12] - 1 / 7) < 1e-12


def test_extract_all_totality_and_determinism():
    inst = _random_inst(10, 0)
    a = extract_all(inst, seed=2)
    b = extract_all(inst, seed=2)
    assert a.names == FEATURE_NAMES and len(a.values) == len(FEATURE_NAMES) == 53
    non_time = [not n.startswith("time_") for n in a.names]
    assert np.all(np.isfinite(a.values))
    np.testing.assert_array_equal(a.values[non_time], b.values[non_time])
    assert all(v >= 0 for v in a.timings.values())


TSPLIB = """NAME: toy
TYPE: TSP
COMMENT: five cities
DIMENSION: 5
EDGE_WEIGHT_TYPE: EUC_2D
NODE_COORD_SECTION
1 0 0
2 3 0
3 0 4
4 1.4 1.4
5 10 10
EOF
"""


def test_parse_tsplib_rounds_euc_2d():
    inst = parse_tsplib(TSPLIB)
    assert inst.n == 5 and inst.name == "toy"
    assert inst.costs[0, 3] == 2.0  # sqrt(3.92) = 1.98 rounds to 2
    assert inst.costs[1, 2] == 5.0


def test_parse_errors_name_line():
    bad = TSPLIB.replace("3 0 4", "3 zero 4")
    with pytest.raises(ParseError) as e:
        parse_tsplib(bad, path="bad.tsp")
    assert e.value.line == 9 and "line 9" in str(e.value)
    with pytest.raises(ParseError):
        parse_tsplib(TSPLIB.replace("DIMENSION: 5", "DIMENSION: 6"))
    with pytest.raises(ParseError):
        parse_tsplib(TSPLIB.replace("DIMENSION: 5\n", ""))
    with pytest.raises(ParseError):
        parse_tsplib(TSPLIB.replace("EUC_2D", "GEO"))
    with pytest.raises(ParseError) as e:
        parse_coord_csv("x,y\n1,2\n3,oops\n4,5\n")
    assert e.value.line == 3


@pytest.mark.parametrize("fmt,body", [
    ("FULL_MATRIX", "0 1 2 3\n1 0 4 5\n2 4 0 6\n3 5 6 0"),
    ("UPPER_ROW", "1 2 3\n4 5\n6"),
    ("LOWER_ROW", "1\n2 4\n3 5 6"),
    ("UPPER_DIAG_ROW", "0 1 2 3\n0 4 5\n0 6\n0"),
    ("LOWER_DIAG_ROW", "0\n1 0\n2 4 0\n3 5 6 0"),
])
def test_explicit_matrices(fmt, body):
    text = (f"NAME: m\nTYPE: TSP\nDIMENSION: 4\nEDGE_WEIGHT_TYPE: EXPLICIT\n"
            f"EDGE_WEIGHT_FORMAT: {fmt}\nEDGE_WEIGHT_SECTION\n{body}\nEOF\n")
    inst = parse_tsplib(text)
    expected = np.array([[0, 1, 2, 3], [1, 0, 4, 5], [2, 4, 0, 6], [3, 5, 6, 0]], float)
    np.testing.assert_array_equal(inst.costs, expected)
    assert inst.coords is None


def test_coord_csv_unrounded():
    inst = parse_coord_csv("id,x,y\n1,0,0\n2,1,1\n3,2,0\n")
    assert abs(inst.costs[0, 1] - math.sqrt(2)) < 1e-15


def test_instance_validation():
    with pytest.raises(DomainError):
        TspInstance(np.array([[0, 1], [1, 0]]))
    with pytest.raises(DomainError):
        TspInstance(np.array([[0, 1, 2], [1, 0, 1], [3, 1, 0]]))
    with pytest.raises(DomainError):
        TspInstance(np.array([[0, 1, -2], [1, 0, 1], [-2, 1, 0]]))
