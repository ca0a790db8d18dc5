import numpy as np
import pytest

from epm.errors import ConfigurationError, DomainError, SingularMatrixError
from epm.ridge import RidgeModel, fit_ridge, forward_select_two_phase, spore_foba
from epm.preprocess import cubic_terms


def _oracle(X, y, eps):
    # dense normal equations through an explicit inverse, deliberately not the
    # factorization used by fit_ridge
    return np.linalg.inv(X.T @ X + eps * np.eye(X.shape[1])) @ (X.T @ y)


def test_fit_ridge_examples():
    np.testing.assert_allclose(fit_ridge(np.eye(2), [2, 3], 0.0), [2, 3])
    np.testing.assert_allclose(fit_ridge(np.eye(2), [2, 3], 1.0), [1, 1.5])
    np.testing.assert_allclose(fit_ridge(np.array([[1.0], [1.0]]), [1, 3], 0.0), [2])


def test_fit_ridge_singular():
    X = np.array([[1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(SingularMatrixError):
        fit_ridge(X, [1, 2], 0.0)
    assert np.all(np.isfinite(fit_ridge(X, [1, 2], 1e-3)))


@pytest.mark.parametrize("eps", [0.001, 1.0])
def test_fit_ridge_matches_oracle(eps):
    rng = np.random.default_rng(5)
    for _ in range(20):
        X = rng.normal(size=(50, 10))
        y = rng.normal(size=50)
        w = fit_ridge(X, y, eps)
        ref = _oracle(X, y, eps)
        assert np.linalg.norm(w - ref) <= 1e-8 * np.linalg.norm(ref)


def test_shrinkage_monotone():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 5))
    y = rng.normal(size=30)
    norms = [np.linalg.norm(fit_ridge(X, y, e)) for e in (0.0, 0.01, 0.1, 1, 10, 100)]
    assert all(a >= b for a, b in zip(norms, norms[1:]))


def test_predict_linear_model():
    m = RidgeModel.linear([2.0, 3.0])
    assert m.predict(np.array([[1.0, 1.0]])).mean[0] == 5.0
    assert m.predict(np.zeros((1, 2))).mean[0] == 0.0
    with pytest.raises(DomainError):
        m.predict(np.zeros((1, 3)))


def test_two_phase_picks_relevant_column_first():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 10))
    y = 2 * X[:, 3]
    m = forward_select_two_phase(X, y, l=3, q=2)
    assert m.terms[0] in ((3,), (3, 3)) or 3 in m.terms[0]
    # the linear phase's first pick is column 3 (re-run with l=1)
    m1 = forward_select_two_phase(X, y, l=1, q=1)
    assert m1.terms == ((3,),)


def test_two_phase_cardinalities():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 4))
    y = X[:, 0] * X[:, 1] + X[:, 2] + 0.01 * rng.normal(size=40)
    full = forward_select_two_phase(X, y, l=4, q=14)
    linear = {t[0] for t in full.terms if len(t) == 1}
    assert len(full.terms) == 14  # 4 linear + 10 pairwise candidates available
    assert linear <= {0, 1, 2, 3}
    one = forward_select_two_phase(X, y, l=4, q=1)
    assert len(one.terms) == 1 and len(one.weights) == 1


def test_two_phase_never_expands_all_columns():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 40))
    y = X[:, 0] + rng.normal(size=60) * 0.1
    m = forward_select_two_phase(X, y, l=5, q=3)
    assert m.n_expanded == 5 + 15
    assert m.n_expanded < 40 + 40 * 41 // 2


def test_two_phase_needs_enough_rows():
    with pytest.raises(ConfigurationError):
        forward_select_two_phase(np.zeros((3, 2)) + np.arange(3)[:, None], np.arange(3.0),
                                 inner_folds=5)


def test_two_phase_interpolates_linear_data():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(50, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + 3.0
    m = forward_select_two_phase(X, y, l=3, q=3, eps=1e-12)
    assert np.max(np.abs(m.predict(X).mean - y)) < 1e-6


def test_spore_finds_square_term():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 3))
    y = X[:, 1] ** 2
    m = spore_foba(X, y)
    assert (1, 1) in m.terms
    assert np.sqrt(np.mean((m.predict(X).mean - y) ** 2)) < 0.05


def test_spore_gamma_infinite_gives_intercept_only():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 2))
    y = X[:, 0] + 5.0
    m = spore_foba(X, y, gamma=np.inf)
    assert m.terms == ()
    np.testing.assert_allclose(m.predict(X).mean, np.mean(y), rtol=1e-6)


def test_spore_t_max_one():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 3))
    y = X[:, 0] + X[:, 1] ** 2 + X[:, 2]
    m = spore_foba(X, y, t_max=1)
    assert len(m.terms) == 1


def test_spore_no_remaining_candidate_beats_gamma():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 3))
    y = 2 * X[:, 0] + X[:, 0] * X[:, 1] + 0.05 * rng.normal(size=80)
    gamma = 0.05
    m = spore_foba(X, y, gamma=gamma, t_max=50)
    assert len(m.terms) < 50
    Z = m.state and (X - m.state.means) / m.state.stddevs
    S = {j for t in m.terms for j in t}

    def train_rmse(terms):
        T = np.column_stack([np.prod(Z[:, list(t)], axis=1) for t in terms] + [np.ones(80)])
        w = np.linalg.solve(T.T @ T + np.diag([1e-3] * len(terms) + [0.0]), T.T @ y)
        return np.sqrt(np.mean((T @ w - y) ** 2))

    base = train_rmse(list(m.terms))
    for r in set(range(3)) - S:
        for t in cubic_terms(S, r):
            assert base - train_rmse(list(m.terms) + [t]) <= gamma + 1e-9
