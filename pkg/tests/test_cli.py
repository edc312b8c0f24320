import csv
import json
import os
import subprocess
import sys

import pytest

from gpmisspec import reporting
from gpmisspec.cli import RunConfig, UsageError, cmd_fit, load_config, main

SMALL = {
    "n": 15,
    "n_reps": 2,
    "workers": 1,
    "quadrature": {"m": 60},
    "optimizer": {"grid": 5, "xtol": 1e-3, "max_evals": 100},
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL))
    return path


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_config_defaults():
    cfg = RunConfig()
    assert cfg.truth == {"sigma2": 1.0, "ell": 3.0, "nu": 10.0, "delta": 0.0625}
    assert cfg.specifications == {"well-specified": 0.0625, "misspecified": 0.01}
    assert cfg.box == {"sigma2_range": [0.01, 100.0], "ell_range": [0.2, 10.0]}
    assert cfg.n == 100 and cfg.model_nu == 10.0


def test_config_round_trip():
    cfg = load_config(None, {"n": 42, "master_seed": 5})
    assert RunConfig.loads(cfg.dumps()) == cfg


def test_config_precedence(config_file):
    cfg = load_config(config_file, {"n": 9})
    assert cfg.n == 9 and cfg.n_reps == 2
    assert cfg.quadrature == {"m": 60, "origin": "iid-uniform"}


@pytest.mark.parametrize("bad", [{"bogus": 1}, {"n": 0}, {"specifications": {"x": 0.001}}, {"formats": ["xml"]}])
def test_config_rejects(tmp_path, bad):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    with pytest.raises(UsageError):
        load_config(p)


def test_simulate(tmp_path, config_file):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", str(config_file), "--n", "5", "--seed", "3", "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(config_file), "--n", "5", "--seed", "3", "--out", str(b)]) == 0
    r = rows(a)
    assert r[0] == ["x_1", "y"] and len(r) == 6
    assert all(len(row) == 2 for row in r)
    assert a.read_bytes() == b.read_bytes()


def test_fit_ml_within_box(tmp_path, config_file, capsys):
    data = tmp_path / "d.csv"
    main(["simulate", "--config", str(config_file), "--out", str(data)])
    capsys.readouterr()
    assert main(["fit", str(data), "--method", "ml", "--config", str(config_file)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert set(rep) == {"method", "sigma2_hat", "ell_hat", "criterion", "evals", "converged"}
    assert 0.2 <= rep["ell_hat"] <= 10.0 and 0.01 <= rep["sigma2_hat"] <= 100.0


def test_fit_misspecified_ordering(tmp_path):
    cfg = load_config(None, {"n": 100, "master_seed": 11})
    data = tmp_path / "d.csv"
    from gpmisspec.cli import cmd_simulate

    cmd_simulate(cfg, data)
    ml = cmd_fit(cfg, data, "ml", specification="misspecified")
    cv = cmd_fit(cfg, data, "cv", specification="misspecified")
    assert cv["ell_hat"] > ml["ell_hat"]


def test_fit_cv_single_point_is_usage_error(tmp_path, capsys):
    data = tmp_path / "one.csv"
    data.write_text("x_1,y\n0.5,1.0\n")
    assert main(["fit", str(data), "--method", "cv"]) == 1


def test_fit_parse_error_reports_line(tmp_path, capsys):
    data = tmp_path / "bad.csv"
    data.write_text("x_1,y\n0.5,1.0\n0.7,abc\n")
    assert main(["fit", str(data), "--method", "ml"]) == 2
    assert ":3:" in capsys.readouterr().err


def test_usage_errors():
    for argv in (["frobnicate"], ["fit", "d.csv", "--method", "ml", "--delta", "0.1", "--specification", "x"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1
    assert main(["report", "/nonexistent/dir"]) == 1
    assert main(["fit", "/nonexistent.csv", "--method", "ml"]) == 2


def test_experiment_smoke_and_report(tmp_path, config_file):
    out = tmp_path / "res"
    assert main(["experiment", "--config", str(config_file), "--out", str(out)]) == 0
    table = reporting.read_table(out / "table1.csv")
    assert len(table) == 4
    for spec in ("well-specified", "misspecified"):
        assert sorted(r["estimator"] for r in table if r["specification"] == spec) == ["cv", "ml"]
    assert len(rows(out / "replications.csv")) == 1 + 2 * 2
    for q in ("ell", "D", "E"):
        for e in ("ml", "cv"):
            h = rows(out / f"hist_{q}_{e}.csv")
            assert h[0] == ["n", "specification", "bin_left", "bin_right", "count"]
            assert sum(int(r[4]) for r in h[1:]) == 4
    summary = json.loads((out / "summary.json").read_text())
    assert RunConfig.from_dict(summary["config"]) == load_config(config_file, {"out": str(out)})

    before = (out / "table1.csv").read_bytes()
    assert main(["report", str(out), "--bins", "30"]) == 0
    assert (out / "table1.csv").read_bytes() == before


def test_emit_config(capsys):
    assert main(["experiment", "--emit-config", "--n", "7"]) == 0
    assert RunConfig.loads(capsys.readouterr().out).n == 7


def test_module_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "gpmisspec", "simulate", "--n", "4", "--out", str(out)],
        capture_output=True, text=True, env={**os.environ},
    )
    assert proc.returncode == 0, proc.stderr
    assert len(rows(out)) == 5
