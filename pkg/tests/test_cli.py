import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from epm.cli import main
from epm.serialize import load_model
from synthetic import toy_files

TSP10 = "NAME: ten\nTYPE: TSP\nDIMENSION: 10\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n" + \
    "".join(f"{i + 1} {x} {y}\n" for i, (x, y) in enumerate(
        [(0, 0), (10, 3), (20, 9), (4, 30), (17, 22), (33, 8), (40, 40), (25, 35), (9, 14),
         (31, 27)])) + "EOF\n"


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def toy(tmp_path):
    return toy_files(tmp_path)


def _data_args(d):
    return ["--runs", str(d / "runs.csv"), "--features", str(d / "features.csv"),
            "--configspace", str(d / "configspace.json")]


def test_features_single_file(tmp_path):
    (tmp_path / "ten.tsp").write_text(TSP10)
    out = tmp_path / "f.csv"
    assert main(["features", str(tmp_path / "ten.tsp"), "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 2 and rows[0][0] == "instance_id" and rows[1][0] == "ten"
    assert len(rows[0]) == 54


def test_features_directory_and_determinism(tmp_path):
    for k in range(3):
        (tmp_path / f"inst{k}.tsp").write_text(TSP10.replace("NAME: ten", f"NAME: i{k}"))
    out1, out2 = tmp_path / "a.out", tmp_path / "b.out"
    assert main(["features", str(tmp_path), "--out", str(out1)]) == 0
    assert main(["features", str(tmp_path), "--out", str(out2)]) == 0
    r1, r2 = _rows(out1), _rows(out2)
    assert len(r1) == 4
    keep = [j for j, n in enumerate(r1[0]) if not n.startswith("time_")]
    assert [[r[j] for j in keep] for r in r1] == [[r[j] for j in keep] for r in r2]


def test_features_malformed_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.tsp"
    bad.write_text(TSP10.replace("4 4 30", "4 4 thirty"))
    assert main(["features", str(bad)]) == 1
    assert "line 9" in capsys.readouterr().err


def test_train_predict_round_trip(toy, tmp_path):
    model = tmp_path / "m.epm"
    assert main(["train", *_data_args(toy), "--model", "rf", "--param", "n_min=1",
                 "--param", "perc=1.0", "--out", str(model)]) == 0
    bundle = load_model(model)
    assert bundle.model.family == "rf"
    pred = tmp_path / "p.csv"
    assert main(["predict", str(model), *_data_args(toy)[:4], "--configs",
                 str(toy / "configs.csv"), "--out", str(pred)]) == 0
    rows = _rows(pred)
    assert rows[0] == ["mean", "variance"] and len(rows) == 101
    runs = _rows(toy / "runs.csv")[1:]
    y = np.log10([max(float(r[2]), 0.005) for r in runs])
    cens = np.array([r[4] == "1" for r in runs])
    mu = np.array([float(r[0]) for r in rows[1:]])
    np.testing.assert_allclose(mu[~cens], y[~cens], atol=1e-9)


def test_predict_query_file_empty_and_mismatch(toy, tmp_path, capsys):
    model = tmp_path / "m.epm"
    assert main(["train", *_data_args(toy), "--out", str(model)]) == 0
    names = [c.name for c in load_model(model).columns]
    q = tmp_path / "q.csv"
    q.write_text(",".join(names) + "\n")
    out = tmp_path / "o.csv"
    assert main(["predict", str(model), str(q), "--out", str(out)]) == 0
    assert out.read_text() == "mean,variance\n"
    q.write_text(",".join(names) + "\n0.5,3,tabu,0.1,0.2,0.3\n")
    assert main(["predict", str(model), str(q), "--out", str(out)]) == 0
    assert len(_rows(out)) == 2
    q.write_text(",".join(names[:-1]) + "\n0.5,3,tabu,0.1,0.2\n")
    assert main(["predict", str(model), str(q)]) == 1
    assert "columns" in capsys.readouterr().err


def test_unknown_model_is_usage_error(toy, tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["train", *_data_args(toy), "--model", "svm", "--out", str(tmp_path / "m")])
    assert e.value.code == 2


def test_censored_sample_strategy(toy, tmp_path, capsys):
    model = tmp_path / "m.epm"
    assert main(["train", *_data_args(toy), "--censoring", "sh-sample",
                 "--out", str(model)]) == 0
    out = capsys.readouterr().out
    assert "censored" in out
    assert load_model(model).censoring == "sh-sample"


def test_schema_problems_enumerated(toy, capsys):
    text = (toy / "runs.csv").read_text().replace("i0,c0,", "nope,c0,").replace(
        "i1,c1,", "i1,zz,")
    (toy / "runs.csv").write_text(text)
    assert main(["train", *_data_args(toy), "--out", str(toy / "m")]) == 1
    err = capsys.readouterr().err
    assert "nope" in err and "zz" in err
    assert not (toy / "m").exists()


def _eval_cfg(toy, **kw):
    cfg = {"runs": "runs.csv", "features": "features.csv", "configspace": "configspace.json",
           "configs": "configs.csv", "seed": 1, "out": "report"}
    cfg.update(kw)
    path = toy / "exp.json"
    path.write_text(json.dumps(cfg))
    return path


def test_evaluate_cv(toy, capsys):
    assert main(["evaluate", str(_eval_cfg(toy, models=["rf"], protocol="cv:10"))]) == 0
    rows = _rows(toy / "report" / "rf_report.csv")
    assert len(rows) == 1 + 10 + 1 and rows[-1][0] == "mean"
    assert (toy / "report" / "report.txt").exists()
    assert not (toy / "report" / "significance.csv").exists()


def test_evaluate_quadrant(toy):
    assert main(["evaluate", str(_eval_cfg(toy, models=["rf"], protocol="quadrant"))]) == 0
    labels = [r[0] for r in _rows(toy / "report" / "rf_report.csv")[1:]]
    assert labels == ["train-instances|train-configs", "train-instances|test-configs",
                      "test-instances|train-configs", "test-instances|test-configs"]


def test_evaluate_two_models_significance(toy):
    models = ["rf", {"family": "rr", "label": "ridge", "params": {"q": 5}}]
    assert main(["evaluate", str(_eval_cfg(toy, models=models, protocol="cv:5"))]) == 0
    sig = _rows(toy / "report" / "significance.csv")
    assert sig[0] == ["model_a", "model_b", "rmse_a", "rmse_b", "p_value"]
    assert sig[1][:2] == ["rf", "ridge"] and 0 <= float(sig[1][4]) <= 1


def test_evaluate_deterministic(toy):
    cfg = _eval_cfg(toy, models=["rf"], protocol="cv:5")
    main(["evaluate", str(cfg)])
    first = (toy / "report" / "rf_report.csv").read_bytes()
    main(["evaluate", str(cfg)])
    assert (toy / "report" / "rf_report.csv").read_bytes() == first


def test_evaluate_bad_config(toy, capsys):
    (toy / "bad.json").write_text("{\n  \"runs\": \n")
    assert main(["evaluate", str(toy / "bad.json")]) == 1
    assert main(["evaluate", str(_eval_cfg(toy, models=["rf"], protocol="holdout"))]) == 1


def test_tune(toy, tmp_path):
    out = tmp_path / "t.json"
    assert main(["tune", *_data_args(toy), "--model", "rf", "--budget", "6",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["inner_cv_rmse"] <= doc["default_inner_cv_rmse"] + 1e-9
    assert doc["evaluations"] <= 6 and doc["model_fits"] <= 12


def test_console_entry_point(tmp_path):
    (tmp_path / "ten.tsp").write_text(TSP10)
    proc = subprocess.run([sys.executable, "-m", "epm.cli", "features", str(tmp_path / "ten.tsp")],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0 and proc.stdout.startswith("instance_id,n,")
    assert "\r" not in proc.stdout
