"""Metrics (RMSE, CC, LL) and the cross-validation / four-quadrant protocols."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .errors import ConfigurationError, DomainError, UndefinedCorrelationError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _pair(y, mu):
    y = np.asarray(y, dtype=float).reshape(-1)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if y.shape != mu.shape:
        raise DomainError(f"length mismatch: {y.shape[0]} vs {mu.shape[0]}")
    return y, mu


def rmse(y, mu) -> float:
    y, mu = _pair(y, mu)
    if y.size == 0:
        raise DomainError("rmse needs at least one point")
    return float(np.sqrt(np.mean((y - mu) ** 2)))


def pearson_cc(y, mu) -> float:
    """(sum mu_i y_i - n mean(mu) mean(y)) / ((n - 1) s_mu s_y)."""
    y, mu = _pair(y, mu)
    n = y.size
    if n < 2:
        raise UndefinedCorrelationError("correlation needs at least two points")
    # exact constancy test; np.std of a constant vector can round to 1e-17
    if np.ptp(y) == 0 or np.ptp(mu) == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant vector")
    s_y, s_mu = np.std(y, ddof=1), np.std(mu, ddof=1)
    # Centered cross products keep the formula's value with less cancellation.
    num = float(np.dot(mu - mu.mean(), y - y.mean()))
    return float(np.clip(num / ((n - 1) * s_mu * s_y), -1.0, 1.0))


def log_likelihood(y, mu, sigma, density: bool = False) -> float:
    """Sum of log phi((y_i - mu_i) / sigma_i).

    With ``density=True`` the ``-log sigma_i`` Jacobian term is included,
    giving the log density of ``y`` under ``N(mu_i, sigma_i^2)``.
    """
    y, mu = _pair(y, mu)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    if np.any(~(sigma > 0)):
        raise DomainError("sigma must be strictly positive")
    z = (y - mu) / sigma
    ll = -0.5 * z**2 - LOG_SQRT_2PI
    if density:
        ll = ll - np.log(sigma)
    return float(np.sum(ll))


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    cc: float
    ll: float
    n_points: int
    label: str = ""
    notes: tuple = ()

    def as_row(self) -> dict:
        return {"label": self.label, "n": self.n_points, "rmse": self.rmse,
                "cc": self.cc, "ll": self.ll}


def evaluate_predictions(y, mean, variance, label: str = "", density: bool = False) -> MetricReport:
    """All three metrics; an undefined CC is reported as NaN with a note."""
    notes = []
    try:
        cc = pearson_cc(y, mean)
    except UndefinedCorrelationError as exc:
        cc = float("nan")
        notes.append(f"cc undefined: {exc}")
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 1e-300))
    return MetricReport(
        rmse=rmse(y, mean),
        cc=cc,
        ll=log_likelihood(y, mean, sigma, density=density),
        n_points=int(np.size(y)),
        label=label,
        notes=tuple(notes),
    )


def mean_report(reports, label: str = "mean") -> MetricReport:
    """Arithmetic mean of fold metrics (NaN CCs are skipped)."""
    ccs = [r.cc for r in reports if not math.isnan(r.cc)]
    return MetricReport(
        rmse=float(np.mean([r.rmse for r in reports])),
        cc=float(np.mean(ccs)) if ccs else float("nan"),
        ll=float(np.mean([r.ll for r in reports])),
        n_points=int(sum(r.n_points for r in reports)),
        label=label,
    )


def kfold_split(n: int, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Seeded permutation of ``range(n)`` cut into ``k`` nearly equal folds."""
    if k < 1 or k > n:
        raise ConfigurationError(f"cannot split {n} points into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


@dataclass(frozen=True)
class QuadrantSplit:
    train_instances: tuple
    test_instances: tuple
    train_configs: tuple
    test_configs: tuple
    seed: int = 0


def _halve(ids, rng):
    ids = list(dict.fromkeys(ids))
    if len(ids) < 2:
        raise ConfigurationError("need at least two ids to split into train and test")
    perm = [ids[i] for i in rng.permutation(len(ids))]
    cut = (len(ids) + 1) // 2
    return tuple(perm[:cut]), tuple(perm[cut:])


def quadrant_split(instance_ids, config_ids, seed: int = 0) -> QuadrantSplit:
    """Split instances and configurations into halves (train gets the odd one)."""
    rng = np.random.default_rng(seed)
    tr_i, te_i = _halve(instance_ids, rng)
    tr_c, te_c = _halve(config_ids, rng)
    return QuadrantSplit(tr_i, te_i, tr_c, te_c, seed)


QUADRANT_LABELS = (
    ("train", "train"),
    ("train", "test"),
    ("test", "train"),
    ("test", "test"),
)


def quadrant_rows(dataset, split: QuadrantSplit) -> dict[tuple[str, str], np.ndarray]:
    """Row indices of each (instances, configurations) quadrant."""
    inst = np.array([i in set(split.train_instances) for i in dataset.instance_ids])
    conf = np.array([c in set(split.train_configs) for c in dataset.config_ids])
    out = {}
    for li, lc in QUADRANT_LABELS:
        mi = inst if li == "train" else ~inst
        mc = conf if lc == "train" else ~conf
        out[(li, lc)] = np.flatnonzero(mi & mc)
    return out


@dataclass
class ExperimentResult:
    reports: list = field(default_factory=list)
    summary: MetricReport | None = None
    protocol: str = "cv"


def run_experiment(dataset, model_spec, protocol: str = "cv", seed: int = 0, k: int = 10,
                   n_train: int | None = None, censoring: str = "uncensored",
                   density_ll: bool = False) -> ExperimentResult:
    """Fit on training portions only and score held-out data.

    ``model_spec`` is a family name, a ``(family, params)`` pair or a
    zero-argument factory returning an unfitted :class:`epm.models.EPM`.
    ``dataset`` must already carry log10 responses.
    """
    from .models import make_model

    def factory():
        return make_model(model_spec, seed=seed)

    if protocol.startswith("cv"):
        if ":" in protocol:
            k = int(protocol.split(":", 1)[1])
        folds = kfold_split(dataset.n, k, seed)
        reports = []
        for f, test in enumerate(folds):
            train = np.setdiff1d(np.arange(dataset.n), test)
            model = factory().fit_dataset(dataset.subset(train), censoring=censoring)
            pd = model.predict(dataset.X[test])
            reports.append(evaluate_predictions(dataset.y[test], pd.mean, pd.variance,
                                                label=f"fold{f + 1}", density=density_ll))
        return ExperimentResult(reports, mean_report(reports), "cv")

    if protocol == "quadrant":
        if not dataset.instance_ids or not dataset.config_ids:
            raise ConfigurationError("quadrant protocol needs instance and config ids")
        split = quadrant_split(dataset.instance_ids, dataset.config_ids, seed)
        rows = quadrant_rows(dataset, split)
        pool = rows[("train", "train")]
        if pool.size == 0:
            raise ConfigurationError("no runs in the training quadrant")
        rng = np.random.default_rng(seed)
        if n_train is not None and n_train < pool.size:
            pool = np.sort(rng.choice(pool, size=n_train, replace=False))
        model = factory().fit_dataset(dataset.subset(pool), censoring=censoring)
        reports = []
        for key in QUADRANT_LABELS:
            idx = rows[key]
            label = f"{key[0]}-instances|{key[1]}-configs"
            if idx.size == 0:
                nan = float("nan")
                reports.append(MetricReport(nan, nan, nan, 0, label, ("empty quadrant",)))
                continue
            pd = model.predict(dataset.X[idx])
            reports.append(evaluate_predictions(dataset.y[idx], pd.mean, pd.variance,
                                                label=label, density=density_ll))
        return ExperimentResult(reports, None, "quadrant")

    raise ConfigurationError(f"unknown protocol {protocol!r}")


def paired_rank_test(a, b) -> float:
    """Two-sided Wilcoxon signed-rank p-value for paired fold metrics."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DomainError("paired samples must have equal length")
    if np.allclose(a, b):
        return 1.0
    return float(scipy.stats.wilcoxon(a, b).pvalue)
