"""Readers and writers for the on-disk formats.

* ``runs.csv``: instance_id, config_id, runtime_s, captime_s, censored (0/1)
* ``features.csv``: instance_id plus one numeric column per feature ("NA" = missing)
* ``configspace.json``: list of ParameterDef records (or ``{"parameters": [...]}``)
* ``configs.csv``: config_id plus one column per parameter

Schema problems are collected and reported together before anything is fitted.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .data import (
    CATEGORICAL,
    Configuration,
    ConfigurationSpace,
    FeatureVector,
    RunRecord,
    assemble_dataset,
)
from .errors import EPMError, ParseError, SchemaError

NA_TOKENS = ("NA", "", "nan", "NaN")
RUN_COLUMNS = ("instance_id", "config_id", "runtime_s", "captime_s", "censored")


class SchemaReport(SchemaError):
    """Several schema violations at once; ``problems`` lists them all."""

    def __init__(self, problems):
        self.problems = list(problems)
        head = f"{len(self.problems)} schema problem(s):"
        super().__init__("\n  ".join([head] + self.problems))


def _read_csv(path):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("file is empty (a header row is required)", 1, path)
    header = [h.strip() for h in rows[0]]
    body = []
    for k, r in enumerate(rows[1:], start=2):
        if not r or all(not c.strip() for c in r):
            continue
        if len(r) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(r)}", k, path)
        body.append((k, [c.strip() for c in r]))
    return header, body


def _number(cell):
    if cell in NA_TOKENS:
        return math.nan
    return float(cell)


def read_configspace(path) -> ConfigurationSpace:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, path) from None
    items = doc.get("parameters", []) if isinstance(doc, dict) else doc
    if not isinstance(items, list):
        raise SchemaError(f"{path}: expected a list of parameter records")
    try:
        return ConfigurationSpace.from_list(items)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed parameter record ({exc})") from None


def _parse_value(param, cell):
    if param.kind == CATEGORICAL:
        for v in param.domain:
            if str(v) == cell:
                return v
        raise SchemaError(f"{cell!r} is not in the domain of {param.name!r}")
    v = float(cell)
    return int(v) if param.kind == "integer" and v == round(v) else v


def read_configs(path, space: ConfigurationSpace, problems=None) -> dict:
    own = problems is None
    problems = [] if own else problems
    header, body = _read_csv(path)
    if not header or header[0] != "config_id":
        raise ParseError("first column must be config_id", 1, path)
    missing = [n for n in space.names if n not in header[1:]]
    if missing:
        problems.append(f"{path}: parameters without a column: {missing}")
        raise SchemaReport(problems)
    cols = [header.index(n) for n in space.names]
    out = {}
    for line, row in body:
        cid = row[0]
        try:
            vals = [_parse_value(p, row[c]) for p, c in zip(space.params, cols)]
            cfg = Configuration(vals)
            cfg.validate(space)
        except (EPMError, ValueError) as exc:
            problems.append(f"{path}, line {line}: {exc}")
            continue
        if cid in out:
            problems.append(f"{path}, line {line}: duplicate config_id {cid!r}")
        out[cid] = cfg
    if own and problems:
        raise SchemaReport(problems)
    return out


def read_features(path, problems=None):
    own = problems is None
    problems = [] if own else problems
    header, body = _read_csv(path)
    if not header or header[0] != "instance_id":
        raise ParseError("first column must be instance_id", 1, path)
    names = tuple(header[1:])
    out = {}
    for line, row in body:
        try:
            vals = [_number(c) for c in row[1:]]
        except ValueError as exc:
            problems.append(f"{path}, line {line}: {exc}")
            continue
        if row[0] in out:
            problems.append(f"{path}, line {line}: duplicate instance_id {row[0]!r}")
        out[row[0]] = FeatureVector(names, vals)
    if own and problems:
        raise SchemaReport(problems)
    return names, out


def read_runs(path, problems=None) -> list:
    own = problems is None
    problems = [] if own else problems
    header, body = _read_csv(path)
    if tuple(header) != RUN_COLUMNS:
        raise ParseError(f"header must be {','.join(RUN_COLUMNS)}", 1, path)
    runs = []
    for line, row in body:
        try:
            flag = row[4]
            if flag not in ("0", "1"):
                raise SchemaError(f"censored must be 0 or 1, got {flag!r}")
            runs.append(RunRecord(row[0], row[1], float(row[2]), float(row[3]), flag == "1"))
        except (EPMError, ValueError) as exc:
            problems.append(f"{path}, line {line}: {exc}")
    if own and problems:
        raise SchemaReport(problems)
    return runs


def load_dataset(runs_path, features_path, space_path, configs_path):
    """Read and cross-check all four inputs; returns (dataset, space)."""
    problems: list = []
    space = read_configspace(space_path)
    configs = read_configs(configs_path, space, problems)
    names, feats = read_features(features_path, problems)
    runs = read_runs(runs_path, problems)
    for k, r in enumerate(runs):
        if r.instance_id not in feats:
            problems.append(f"{runs_path}: run {k + 1} references unknown instance_id "
                            f"{r.instance_id!r}")
        if r.config_id not in configs:
            problems.append(f"{runs_path}: run {k + 1} references unknown config_id "
                            f"{r.config_id!r}")
    if problems:
        raise SchemaReport(problems)
    return assemble_dataset(runs, feats, space, configs, names), space


def read_query_rows(path, columns) -> np.ndarray:
    """Design rows whose header lists the model's column names (in order).

    Categorical cells hold domain values; "NA" marks a missing feature.
    """
    header, body = _read_csv(path)
    names = [c.name for c in columns]
    if header != names:
        raise SchemaError(f"{path}: query has {len(header)} columns {header[:5]}..., "
                          f"model expects {len(names)}")
    X = np.empty((len(body), len(columns)))
    for i, (line, row) in enumerate(body):
        for j, (col, cell) in enumerate(zip(columns, row)):
            try:
                if col.kind == CATEGORICAL:
                    hits = [k for k, v in enumerate(col.domain) if str(v) == cell]
                    if not hits:
                        raise SchemaError(f"{cell!r} not in domain of {col.name!r}")
                    X[i, j] = hits[0]
                else:
                    X[i, j] = _number(cell)
            except (EPMError, ValueError) as exc:
                raise ParseError(str(exc), line, path) from None
    return X


def fmt(v) -> str:
    """Shortest round-trip float text; missing values as NA."""
    v = float(v)
    return "NA" if math.isnan(v) else repr(v)


def write_csv(path_or_fh, header, rows) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)

    if hasattr(path_or_fh, "write"):
        emit(path_or_fh)
    else:
        with open(path_or_fh, "w", newline="", encoding="utf-8") as fh:
            emit(fh)
