"""Domain types: parameters, configurations, runs and assembled datasets.

Categorical parameter values are stored in design matrices as their integer
position in the declared domain (as floats); missing feature values are NaN
until preprocessing replaces them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, LookupFailure, SchemaError

CATEGORICAL = "categorical"
INTEGER = "integer"
CONTINUOUS = "continuous"
KINDS = (CATEGORICAL, INTEGER, CONTINUOUS)

MISSING = float("nan")


def is_missing(value) -> bool:
    return value is None or (isinstance(value, float) and np.isnan(value))


@dataclass(frozen=True)
class ParameterDef:
    name: str
    kind: str
    domain: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown parameter kind {self.kind!r} for {self.name!r}")
        object.__setattr__(self, "domain", tuple(self.domain))
        if self.kind == CATEGORICAL:
            if len(set(self.domain)) < 2 or len(set(self.domain)) != len(self.domain):
                raise SchemaError(
                    f"categorical parameter {self.name!r} needs >= 2 distinct values"
                )
        else:
            if len(self.domain) != 2:
                raise SchemaError(f"numeric parameter {self.name!r} needs [lower, upper]")
            lo, hi = float(self.domain[0]), float(self.domain[1])
            if not lo <= hi:
                raise SchemaError(f"parameter {self.name!r} has lower > upper")
            object.__setattr__(self, "domain", (lo, hi))

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    def contains(self, value) -> bool:
        if self.kind == CATEGORICAL:
            return value in self.domain
        try:
            v = float(value)
        except (TypeError, ValueError):
            return False
        if self.kind == INTEGER and v != round(v):
            return False
        return self.domain[0] <= v <= self.domain[1]

    def encode(self, value) -> float:
        """Numeric representation used in design matrices."""
        if not self.contains(value):
            raise DomainError(f"value {value!r} outside domain of {self.name!r}")
        if self.kind == CATEGORICAL:
            return float(self.domain.index(value))
        return float(value)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "domain": list(self.domain)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParameterDef":
        return cls(name=d["name"], kind=d["kind"], domain=tuple(d["domain"]))


@dataclass(frozen=True)
class ConfigurationSpace:
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise SchemaError("parameter names must be unique")

    def __len__(self):
        return len(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def get(self, name: str) -> ParameterDef:
        for p in self.params:
            if p.name == name:
                return p
        raise LookupFailure(f"no parameter named {name!r}")

    def to_list(self) -> list[dict]:
        return [p.to_dict() for p in self.params]

    @classmethod
    def from_list(cls, items: Sequence[Mapping]) -> "ConfigurationSpace":
        return cls(tuple(ParameterDef.from_dict(d) for d in items))


@dataclass(frozen=True)
class Configuration:
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    def validate(self, space: ConfigurationSpace) -> None:
        if len(self.values) != len(space):
            raise SchemaError(
                f"configuration has {len(self.values)} values, space has {len(space)}"
            )
        for p, v in zip(space.params, self.values):
            if not p.contains(v):
                raise DomainError(f"value {v!r} outside domain of {p.name!r}")


@dataclass(frozen=True)
class FeatureVector:
    names: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        vals = tuple(MISSING if is_missing(v) else float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(self.names) != len(self.values):
            raise SchemaError("feature vector length differs from its name list")


@dataclass(frozen=True)
class RunRecord:
    instance_id: str
    config_id: str
    observed: float
    captime: float
    censored: bool = False

    def __post_init__(self):
        if self.observed < 0:
            raise DomainError("observed runtime must be >= 0")
        if not self.captime > 0:
            raise DomainError("captime must be > 0")
        if self.censored and self.observed != self.captime:
            raise DomainError("a censored run must report observed == captime")
        if not self.censored and self.observed > self.captime:
            raise DomainError("an uncensored run cannot exceed its captime")


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    origin: str  # "parameter" | "feature"
    kind: str
    domain: tuple = ()


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Design matrix plus response, censoring flags and column metadata."""

    X: np.ndarray
    y: np.ndarray
    censored: np.ndarray
    captimes: np.ndarray
    columns: tuple
    instance_ids: tuple = ()
    config_ids: tuple = ()
    log_response: bool = False

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(-1, len(self.columns))
        n = X.shape[0]
        for name in ("y", "captimes"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if v.shape[0] != n:
                raise SchemaError(f"{name} has {v.shape[0]} entries, X has {n} rows")
            object.__setattr__(self, name, _readonly(v))
        c = np.asarray(self.censored, dtype=bool).reshape(-1)
        if c.shape[0] != n:
            raise SchemaError("censored flags do not match row count")
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "censored", _readonly(c))
        object.__setattr__(self, "columns", tuple(self.columns))
        for name in ("instance_ids", "config_ids"):
            ids = tuple(getattr(self, name))
            if ids and len(ids) != n:
                raise SchemaError(f"{name} does not match row count")
            object.__setattr__(self, name, ids)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def cat_sizes(self) -> dict[int, int]:
        """Map categorical column index -> domain size."""
        return {
            j: len(c.domain) for j, c in enumerate(self.columns) if c.kind == CATEGORICAL
        }

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            X=self.X[rows],
            y=self.y[rows],
            censored=self.censored[rows],
            captimes=self.captimes[rows],
            columns=self.columns,
            instance_ids=tuple(self.instance_ids[i] for i in rows) if self.instance_ids else (),
            config_ids=tuple(self.config_ids[i] for i in rows) if self.config_ids else (),
            log_response=self.log_response,
        )

    def with_log_response(self, resolution_floor: float = 0.01) -> "Dataset":
        """Return a copy whose response and captimes are log10 seconds."""
        from .preprocess import log_transform_response

        if self.log_response:
            return self
        return Dataset(
            X=self.X,
            y=log_transform_response(self.y, resolution_floor),
            censored=self.censored,
            captimes=log_transform_response(self.captimes, resolution_floor),
            columns=self.columns,
            instance_ids=self.instance_ids,
            config_ids=self.config_ids,
            log_response=True,
        )


@dataclass(frozen=True)
class PredictiveDistribution:
    """Per-query Gaussian predictive mean and variance (log10 seconds)."""

    mean: np.ndarray
    variance: np.ndarray = field(default=None)

    def __post_init__(self):
        m = _readonly(np.atleast_1d(np.asarray(self.mean, dtype=float)))
        v = self.variance
        v = np.zeros_like(m) if v is None else np.atleast_1d(np.asarray(v, dtype=float))
        if v.shape != m.shape:
            raise SchemaError("mean and variance shapes differ")
        if np.any(v < 0):
            raise DomainError("predictive variance must be >= 0")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "variance", _readonly(v))

    def __len__(self):
        return self.mean.shape[0]

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def assemble_dataset(
    runs: Sequence[RunRecord],
    features: Mapping[str, FeatureVector],
    space: ConfigurationSpace,
    configs: Mapping[str, Configuration],
    feature_names: Sequence[str] | None = None,
) -> Dataset:
    """Build the design matrix ``[theta_i, z_i]`` for a list of runs.

    The response holds raw (untransformed) seconds; call
    :meth:`Dataset.with_log_response` before fitting.
    """
    if feature_names is None:
        name_lists = {fv.names for fv in features.values()}
        if len(name_lists) > 1:
            raise SchemaError("feature vectors do not share one name list")
        feature_names = next(iter(name_lists)) if name_lists else ()
    feature_names = tuple(feature_names)
    for iid, fv in features.items():
        if fv.names != feature_names:
            raise SchemaError(f"instance {iid!r} has inconsistent feature names")

    columns = [ColumnInfo(p.name, "parameter", p.kind, p.domain) for p in space.params]
    columns += [ColumnInfo(f, "feature", CONTINUOUS) for f in feature_names]
    k, m = len(space), len(feature_names)

    X = np.empty((len(runs), k + m))
    encoded: dict[str, list[float]] = {}
    for i, run in enumerate(runs):
        if run.config_id not in configs:
            raise LookupFailure(f"unknown config_id {run.config_id!r}")
        if run.instance_id not in features:
            raise LookupFailure(f"unknown instance_id {run.instance_id!r}")
        if run.config_id not in encoded:
            cfg = configs[run.config_id]
            cfg.validate(space)
            encoded[run.config_id] = [p.encode(v) for p, v in zip(space.params, cfg.values)]
        X[i, :k] = encoded[run.config_id]
        X[i, k:] = features[run.instance_id].values

    return Dataset(
        X=X,
        y=np.array([r.observed for r in runs], dtype=float),
        censored=np.array([r.censored for r in runs], dtype=bool),
        captimes=np.array([r.captime for r in runs], dtype=float),
        columns=tuple(columns),
        instance_ids=tuple(r.instance_id for r in runs),
        config_ids=tuple(r.config_id for r in runs),
    )
