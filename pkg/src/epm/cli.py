"""Command-line front end: ``epm {features,train,predict,evaluate,tune}``.

Set ``EPM_LOG`` (e.g. ``DEBUG``, ``INFO``) to control log verbosity; logs go
to stderr. Exit status is 0 on success, 1 on a data/model error and 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigurationError, EPMError
from .evaluation import paired_rank_test, run_experiment
from .hypertune import tune_model
from .models import CENSORING_STRATEGIES, FAMILIES, EPM, make_model
from .serialize import load_model, save_model

log = logging.getLogger("epm")

TSP_SUFFIXES = (".tsp", ".csv")


@dataclass
class TrainedBundle:
    """What a model file holds: the fitted pipeline plus column metadata."""

    model: EPM
    columns: tuple
    feature_names: tuple
    space: object
    censoring: str
    seed: int


def _setup_logging():
    level = os.environ.get("EPM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_params(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigurationError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = json.loads(v)
        except json.JSONDecodeError:
            out[k.strip()] = v
    return out


def _protocol(text):
    if text == "quadrant" or text == "cv":
        return text
    if text.startswith("cv:") and text[3:].isdigit() and int(text[3:]) >= 2:
        return text
    raise argparse.ArgumentTypeError("protocol must be cv:K (K >= 2) or quadrant")


# -- verbs --------------------------------------------------------------------

def cmd_features(args) -> int:
    from .tsp import FEATURE_NAMES, extract_all, read_instance

    src = Path(args.input)
    files = sorted(p for p in src.iterdir() if p.suffix.lower() in TSP_SUFFIXES) \
        if src.is_dir() else [src]
    if not files:
        raise ConfigurationError(f"no .tsp or .csv instances in {src}")
    rows = []
    for k, f in enumerate(files):
        inst = read_instance(f)
        row = extract_all(inst, seed=args.seed + k)
        rows.append([f.stem] + [io.fmt(v) for v in row.values])
        log.info("features for %s (n=%d)", f.name, inst.n)
    header = ["instance_id"] + list(FEATURE_NAMES)
    if args.out:
        io.write_csv(args.out, header, rows)
    else:
        io.write_csv(sys.stdout, header, rows)
    return 0


def _load(args):
    configs = args.configs or str(Path(args.configspace).with_name("configs.csv"))
    return io.load_dataset(args.runs, args.features, args.configspace, configs)


def cmd_train(args) -> int:
    dataset, space = _load(args)
    ds = dataset.with_log_response()
    model = make_model((args.model, _parse_params(args.param)), seed=args.seed,
                       n_jobs=args.threads)
    model.fit_dataset(ds, censoring=args.censoring)
    bundle = TrainedBundle(model, ds.columns, tuple(c.name for c in ds.columns
                                                    if c.origin == "feature"),
                           space, args.censoring, args.seed)
    save_model(bundle, args.out)
    st = model.state
    kept = len(st.kept_columns) if st is not None else ds.p
    print(f"trained {args.model} on n={ds.n} runs ({int(ds.censored.sum())} censored), "
          f"p={ds.p} columns, {kept} kept after dropping constants; saved {args.out}")
    return 0


def cmd_predict(args) -> int:
    bundle = load_model(args.model_file)
    if not isinstance(bundle, TrainedBundle):
        raise ConfigurationError("model file does not hold a trained bundle")
    if args.query:
        X = io.read_query_rows(args.query, bundle.columns)
    elif args.runs and args.features:
        configs = args.configs or (str(Path(args.configspace).with_name("configs.csv"))
                                   if args.configspace else None)
        if configs is None:
            raise ConfigurationError("--runs needs --configs (or --configspace)")
        space = bundle.space
        problems: list = []
        cfgs = io.read_configs(configs, space, problems)
        names, feats = io.read_features(args.features, problems)
        runs = io.read_runs(args.runs, problems)
        if problems:
            raise io.SchemaReport(problems)
        from .data import assemble_dataset
        X = assemble_dataset(runs, feats, space, cfgs, names).X
    else:
        raise ConfigurationError("give a query CSV or --runs with --features")
    if X.shape[0] == 0:
        rows = []
    else:
        pd = bundle.model.predict(X)
        rows = [[io.fmt(m), io.fmt(v)] for m, v in zip(pd.mean, pd.variance)]
    if args.out:
        io.write_csv(args.out, ["mean", "variance"], rows)
    else:
        io.write_csv(sys.stdout, ["mean", "variance"], rows)
    return 0


def _model_entries(models):
    out = []
    for m in models:
        if isinstance(m, str):
            out.append((m, m, {}, False))
        else:
            fam = m["family"]
            out.append((m.get("label", fam), fam, dict(m.get("params", {})),
                        bool(m.get("tune", False))))
    labels = [e[0] for e in out]
    if len(set(labels)) != len(labels):
        raise ConfigurationError("model labels must be unique; set 'label' per entry")
    return out


def cmd_evaluate(args) -> int:
    cfg_path = Path(args.config)
    try:
        cfg = json.loads(cfg_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise io.ParseError(f"invalid JSON: {exc.msg}", exc.lineno, cfg_path) from None
    base = cfg_path.parent

    def rel(key, default=None):
        v = cfg.get(key, default)
        return None if v is None else str((base / v) if not Path(v).is_absolute() else v)

    for key in ("runs", "features", "configspace"):
        if key not in cfg:
            raise ConfigurationError(f"evaluation config lacks {key!r}")
    configs = rel("configs") or str(Path(rel("configspace")).with_name("configs.csv"))
    dataset, _ = io.load_dataset(rel("runs"), rel("features"), rel("configspace"), configs)
    ds = dataset.with_log_response()
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    protocol = args.protocol or cfg.get("protocol", "cv:10")
    censoring = args.censoring or cfg.get("censoring", "uncensored")
    out_dir = Path(args.out or rel("out", "report"))
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = _model_entries(cfg.get("models", ["rf"]))

    table = []
    fold_rmse = {}
    for label, fam, params, tune in entries:
        if tune:
            tr = tune_model(fam, ds, seed=seed, censoring=censoring)
            params = dict(tr.params, **params)
            log.info("%s tuned to %s (inner RMSE %.4g)", label, params, tr.value)
        spec = (fam, params)
        res = run_experiment(ds, spec, protocol=protocol, seed=seed, censoring=censoring,
                             n_train=cfg.get("n_train"))
        rows = list(res.reports) + ([res.summary] if res.summary is not None else [])
        io.write_csv(out_dir / f"{label}_report.csv", ["label", "n", "rmse", "cc", "ll"],
                     [[r.label, r.n_points, io.fmt(r.rmse), io.fmt(r.cc), io.fmt(r.ll)]
                      for r in rows])
        table.extend((label, r) for r in rows)
        fold_rmse[label] = [r.rmse for r in res.reports]

    lines = [f"{'model':<12}{'split':<34}{'n':>8}{'rmse':>10}{'cc':>9}{'ll':>14}"]
    for label, r in table:
        lines.append(f"{label:<12}{r.label:<34}{r.n_points:>8}{r.rmse:>10.4f}{r.cc:>9.4f}"
                     f"{r.ll:>14.2f}")
    sig_rows = []
    labels = [e[0] for e in entries]
    if len(labels) >= 2 and protocol != "quadrant":
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                a, b = labels[i], labels[j]
                p = paired_rank_test(fold_rmse[a], fold_rmse[b])
                sig_rows.append([a, b, io.fmt(np.mean(fold_rmse[a])),
                                 io.fmt(np.mean(fold_rmse[b])), io.fmt(p)])
                lines.append(f"wilcoxon {a} vs {b} on fold RMSE: p = {p:.4g}")
        io.write_csv(out_dir / "significance.csv",
                     ["model_a", "model_b", "rmse_a", "rmse_b", "p_value"], sig_rows)
    text = "\n".join(lines) + "\n"
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_tune(args) -> int:
    dataset, _ = _load(args)
    ds = dataset.with_log_response()
    res = tune_model(args.model, ds, seed=args.seed, budget=args.budget,
                     censoring=args.censoring)
    doc = {"family": args.model, "params": res.params, "inner_cv_rmse": res.value,
           "default_inner_cv_rmse": res.default_value, "evaluations": len(res.history),
           "model_fits": res.n_fits}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for forests")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--runs", required=True, help="runs.csv")
    data.add_argument("--features", required=True, help="features.csv")
    data.add_argument("--configspace", required=True, help="configspace.json")
    data.add_argument("--configs", help="configs.csv (default: next to configspace.json)")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", choices=sorted(FAMILIES), default="rf")
    model.add_argument("--censoring", choices=CENSORING_STRATEGIES, default="uncensored")

    p = argparse.ArgumentParser(prog="epm", description="Empirical performance models.")
    sub = p.add_subparsers(dest="verb", required=True)

    f = sub.add_parser("features", parents=[common], help="extract TSP instance features")
    f.add_argument("input", help="TSPLIB/CSV file or directory of them")
    f.add_argument("--out", help="output CSV (default stdout)")
    f.set_defaults(func=cmd_features)

    t = sub.add_parser("train", parents=[common, data, model], help="fit and save a model")
    t.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="hyperparameter override (repeatable)")
    t.add_argument("--out", required=True, help="model file to write")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", parents=[common], help="predict with a saved model")
    pr.add_argument("model_file")
    pr.add_argument("query", nargs="?", help="CSV of design rows headed by column names")
    pr.add_argument("--runs", help="predict the rows of a runs.csv instead")
    pr.add_argument("--features")
    pr.add_argument("--configspace")
    pr.add_argument("--configs")
    pr.add_argument("--out", help="output CSV (default stdout)")
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", help="run a CV or four-quadrant experiment")
    e.add_argument("config", help="experiment JSON")
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--protocol", type=_protocol, default=None)
    e.add_argument("--censoring", choices=CENSORING_STRATEGIES, default=None)
    e.add_argument("--out", help="report directory")
    e.set_defaults(func=cmd_evaluate)

    tu = sub.add_parser("tune", parents=[common, data, model],
                        help="tune hyperparameters by DIRECT on 2-fold CV RMSE")
    tu.add_argument("--budget", type=int, default=30)
    tu.add_argument("--out", help="write the tuned parameters as JSON")
    tu.set_defaults(func=cmd_tune)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except (EPMError, OSError) as exc:
        print(f"epm {args.verb}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
