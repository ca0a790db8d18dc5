"""Seeded synthetic benchmarks shared by the tests and the acceptance suite."""

from __future__ import annotations

import numpy as np

from epm.data import (
    CATEGORICAL,
    CONTINUOUS,
    ColumnInfo,
    Configuration,
    ConfigurationSpace,
    Dataset,
    FeatureVector,
    ParameterDef,
    RunRecord,
    assemble_dataset,
)


def _dataset(X, y, columns, censored=None, captimes=None, inst=(), conf=()):
    n = len(y)
    return Dataset(X=X, y=y, censored=np.zeros(n, bool) if censored is None else censored,
                   captimes=np.full(n, np.inf) if captimes is None else captimes,
                   columns=tuple(columns), instance_ids=tuple(inst), config_ids=tuple(conf),
                   log_response=True)


def heterogeneous_benchmark(n_instances=60, n_configs=60, seed=0, noise=0.1):
    """10 instance features x 5 parameters (params 3 and 4 categorical).

    Runtime is a product of instance hardness, configuration speed and an
    instance-configuration interaction, so log10 runtime is a smooth sum
    plus noise (sd ``noise``). Returns (instance features, config matrix,
    response function) for random pairing.
    """
    rng = np.random.default_rng(seed)
    Z = rng.uniform(0, 1, size=(n_instances, 10))
    T = np.column_stack([rng.uniform(0, 1, (n_configs, 3)),
                         rng.integers(0, 3, n_configs), rng.integers(0, 4, n_configs)])
    cat3 = np.array([0.0, 0.6, -0.4])
    cat4 = np.array([0.2, -0.3, 0.5, 0.0])

    def log_runtime(z, t, eps):
        hard = 1.5 * z[:, 0] + np.sin(3 * z[:, 1]) + 0.8 * z[:, 2] * z[:, 3] + 0.5 * z[:, 4] ** 2
        speed = 0.9 * t[:, 0] - 0.6 * t[:, 1] ** 2 + cat3[t[:, 3].astype(int)] \
            + cat4[t[:, 4].astype(int)]
        inter = 1.2 * z[:, 0] * t[:, 2] + 0.5 * (t[:, 3] == 1) * z[:, 5]
        return hard + speed + inter + eps

    def sample(n, rng2):
        ii = rng2.integers(0, n_instances, n)
        cc = rng2.integers(0, n_configs, n)
        X = np.hstack([T[cc], Z[ii]])
        y = log_runtime(Z[ii], T[cc], rng2.normal(0, noise, n))
        return X, y

    columns = [ColumnInfo(f"theta{j}", "parameter", CONTINUOUS) for j in range(3)]
    columns += [ColumnInfo("theta3", "parameter", CATEGORICAL, ("a", "b", "c")),
                ColumnInfo("theta4", "parameter", CATEGORICAL, ("w", "x", "y", "z"))]
    columns += [ColumnInfo(f"z{j}", "feature", CONTINUOUS) for j in range(10)]
    return sample, columns


def heterogeneous_split(n_train=500, n_test=500, seed=0):
    sample, columns = heterogeneous_benchmark(seed=seed)
    rng = np.random.default_rng(seed + 1000)
    Xtr, ytr = sample(n_train, rng)
    Xte, yte = sample(n_test, rng)
    return _dataset(Xtr, ytr, columns), Xte, yte


def piecewise_benchmark(n=600, seed=0, noise=0.1):
    """Three regimes selected by feature z0, with unrelated response shapes
    (think three solver behaviours on three instance families)."""
    rng = np.random.default_rng(seed)
    p = 8
    X = rng.uniform(0, 1, size=(n, p))
    regime = np.digitize(X[:, 0], [1 / 3, 2 / 3])
    y = np.empty(n)
    r0, r1, r2 = regime == 0, regime == 1, regime == 2
    y[r0] = 0.5 + 1.0 * X[r0, 1]
    y[r1] = 3.0 - 2.0 * X[r1, 2] + 1.5 * (X[r1, 3] > 0.5)
    y[r2] = -1.0 + 2.5 * (X[r2, 4] > 0.3) * (X[r2, 5] < 0.6) + X[r2, 1]
    y += rng.normal(0, noise, n)
    columns = [ColumnInfo(f"z{j}", "feature", CONTINUOUS) for j in range(p)]
    return _dataset(X, y, columns)


def censored_benchmark(n=1000, seed=0, censor_frac=0.4, noise=0.2, n_test=500):
    """Linear-ish log-runtime function with a generating cap, right-censored
    at one fixed threshold (the (1 - censor_frac) quantile).

    Returns a dict with train arrays, the censoring threshold, the
    generating cap and a test set of uncensored ground truth.
    """
    rng = np.random.default_rng(seed)
    p = 5
    w = np.array([1.2, -0.8, 0.6, 0.0, 0.3])
    cap = 3.0

    def draw(m):
        X = rng.uniform(0, 1, size=(m, p))
        y = 0.5 + X @ w * 2.0 + 0.8 * X[:, 0] * X[:, 2] + rng.normal(0, noise, m)
        return X, np.minimum(y, cap)

    X, y_true = draw(n)
    kappa = float(np.quantile(y_true, 1 - censor_frac))
    cens = y_true > kappa
    y_obs = np.where(cens, kappa, y_true)
    Xte, yte = draw(n_test)
    return {"X": X, "y_obs": y_obs, "censored": cens, "y_true": y_true, "kappa": kappa,
            "cap": cap, "X_test": Xte, "y_test": yte}


def toy_files(tmp, n_instances=10, n_configs=10, seed=0, censor=True):
    """Write runs.csv / features.csv / configspace.json / configs.csv into ``tmp``."""
    import json

    rng = np.random.default_rng(seed)
    space = [{"name": "alpha", "kind": "continuous", "domain": [0.0, 1.0]},
             {"name": "moves", "kind": "integer", "domain": [1, 10]},
             {"name": "heur", "kind": "categorical", "domain": ["greedy", "random", "tabu"]}]
    (tmp / "configspace.json").write_text(json.dumps(space))
    cfg_rows = []
    for c in range(n_configs):
        cfg_rows.append((f"c{c}", float(np.round(rng.uniform(), 4)), int(rng.integers(1, 11)),
                         ["greedy", "random", "tabu"][c % 3]))
    with open(tmp / "configs.csv", "w") as fh:
        fh.write("config_id,alpha,moves,heur\n")
        for r in cfg_rows:
            fh.write(f"{r[0]},{r[1]},{r[2]},{r[3]}\n")
    feats = np.round(rng.uniform(0, 1, (n_instances, 3)), 4)
    with open(tmp / "features.csv", "w") as fh:
        fh.write("instance_id,f1,f2,f3\n")
        for i in range(n_instances):
            vals = ["NA" if (i == 3 and j == 1) else str(feats[i, j]) for j in range(3)]
            fh.write(f"i{i}," + ",".join(vals) + "\n")
    captime = 100.0
    with open(tmp / "runs.csv", "w") as fh:
        fh.write("instance_id,config_id,runtime_s,captime_s,censored\n")
        for i in range(n_instances):
            for c in range(n_configs):
                lr = -1 + 2 * feats[i, 0] + cfg_rows[c][1] + 0.1 * (c % 3) \
                    + rng.normal(0, 0.1)
                rt = float(np.round(10 ** lr, 4))
                cens = censor and rt >= captime * 0.05
                if cens:
                    rt = captime * 0.05
                fh.write(f"i{i},c{c},{rt},{captime * 0.05 if censor else captime},"
                         f"{int(cens)}\n")
    return tmp


def mixed_inputs(n, rng, n_cont=2, cat_sizes=(3, 4)):
    """Random rows with continuous columns first, then categorical codes."""
    cont = rng.normal(size=(n, n_cont))
    cats = np.column_stack([rng.integers(0, k, n) for k in cat_sizes]).astype(float)
    X = np.hstack([cont, cats])
    mask = np.array([False] * n_cont + [True] * len(cat_sizes))
    return X, mask


def assembled_example():
    space = ConfigurationSpace((ParameterDef("a", CATEGORICAL, ("x", "y")),))
    feats = {"i1": FeatureVector(("f1", "f2"), (1.0, 2.0)),
             "i2": FeatureVector(("f1", "f2"), (3.0, float("nan")))}
    configs = {"c1": Configuration(("x",)), "c2": Configuration(("y",))}
    runs = [RunRecord("i1", "c1", 1.0, 10.0), RunRecord("i2", "c2", 10.0, 10.0, True)]
    return assemble_dataset(runs, feats, space, configs), runs, feats, configs
