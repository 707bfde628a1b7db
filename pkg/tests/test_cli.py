import csv
import io
import json
import os
import stat
import subprocess
import sys

import pytest

from onesided import cli

WALK25 = {"mode": "lattice", "step": 1, "atoms": [[1, 0.25], [-1, 0.75]]}
SOLVE = {"task": "solve", "reward": {"kind": "PowerPlus", "nu": 1}, "process": WALK25, "q": 0}


def _write(tmp_path, problem, name="problem.json"):
    p = tmp_path / name
    p.write_text(json.dumps(problem))
    return str(p)


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_reports_threshold_and_value(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["solve", "--spec", _write(tmp_path, SOLVE), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "ok" and rep["task"] == "solve"
    sol = rep["result"]["solution"]
    assert sol["regime"] == "Finite" and abs(sol["u"] - 0.5) <= 1e-3
    rows = {float(r["x"]): float(r["V"]) for r in _read_csv(out / "value.csv")}
    assert rows[0.0] == pytest.approx(1 / 3, abs=1e-6)
    assert rep["options"]["tol"] == 1e-9 and rep["options"]["seed"] == 0
    cli.validate_report(rep)


def test_report_is_bit_identical(tmp_path):
    spec = _write(tmp_path, {**SOLVE, "process": {"mode": "sampler", "family": "gaussian", "mean": -0.5, "sd": 1},
                             "numerics": {"budget": 1 << 15, "value_budget": 5000}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["solve", "--spec", spec, "--out", str(a), "--seed", "11"]) == 0
    assert cli.main(["solve", "--spec", spec, "--out", str(b), "--seed", "11"]) == 0
    for name in ("report.json", "value.csv", "ratio.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_malformed_reward_exits_1(tmp_path, capsys):
    bad = {**SOLVE, "reward": {"kind": "PowerPlus", "nu": 1, "increasing": False}}
    assert cli.main(["solve", "--spec", _write(tmp_path, bad), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "logconcave" in err and "increasing" in err
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["status"] == "error" and rep["error"].startswith("reward:")


def test_schema_violation_exits_1(tmp_path, capsys):
    bad = {**SOLVE, "q": -1}
    assert cli.main(["solve", "--spec", _write(tmp_path, bad), "--out", str(tmp_path / "o")]) == 1
    assert "schema" in capsys.readouterr().err


def test_empty_grid_gives_empty_files(tmp_path):
    out = tmp_path / "o"
    prob = {**SOLVE, "numerics": {"value_grid": []}}
    assert cli.main(["solve", "--spec", _write(tmp_path, prob), "--out", str(out)]) == 0
    assert (out / "value.csv").read_text() == ""
    assert (out / "plot_value.tsv").read_text() == ""
    assert (out / "plot_staircase.tsv").read_text() == ""


def test_plot_ratio_crosses_one(tmp_path):
    out = tmp_path / "o"
    cli.main(["solve", "--spec", _write(tmp_path, SOLVE), "--out", str(out)])
    rows = list(csv.DictReader(io.StringIO((out / "plot_ratio.tsv").read_text()), delimiter="\t"))
    pts = sorted((float(r["x"]), float(r["rho"])) for r in rows)
    rhos = [r for _, r in pts]
    assert all(a >= b - 1e-12 for a, b in zip(rhos, rhos[1:]))
    assert rhos[0] > 1 >= rhos[-1]


def test_classify_inconclusive_exits_2(tmp_path):
    prob = {"reward": {"kind": "PowerPlus", "nu": 2},
            "process": {"drift": -4, "jumps": {"rate": 1, "law": {"family": "pareto", "alpha": 1.5, "scale": 1}}},
            "q": 0.1}
    assert cli.main(["classify", "--spec", _write(tmp_path, prob), "--out", str(tmp_path / "o")]) == 2
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["result"]["verdict"]["verdict"] == "Inconclusive"


def test_oracle_check(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["oracle", "--spec", _write(tmp_path, SOLVE), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["result"]["cross_validation"]["pass"]
    rows = _read_csv(out / "value.csv")
    stop = [float(r["x"]) for r in rows if r["inStoppingSet"] == "1"]
    assert min(stop) == 1.0


@pytest.mark.slow
def test_levy_sequence(tmp_path):
    prob = {"reward": {"kind": "Indicator", "a": 0}, "process": {"drift": 0, "sigma": 1}, "q": 0.5,
            "numerics": {"levels": 4, "budget": 1 << 14}}
    out = tmp_path / "o"
    assert cli.main(["levy", "--spec", _write(tmp_path, prob), "--out", str(out)]) == 0
    rows = _read_csv(out / "sequence.csv")
    assert [int(r["level"]) for r in rows] == [0, 1, 2, 3, 4]
    us = [float(r["u"]) for r in rows]
    assert all(u <= 1e-9 for u in us)
    assert (out / "plot_staircase.tsv").read_text().startswith("level\tu\n")


def test_files_respect_umask(tmp_path):
    old = os.umask(0o022)
    try:
        cli.main(["solve", "--spec", _write(tmp_path, SOLVE), "--out", str(tmp_path / "o")])
    finally:
        os.umask(old)
    mode = stat.S_IMODE(os.stat(tmp_path / "o" / "report.json").st_mode)
    assert mode == 0o644


def test_jsonable_spells_infinities():
    assert cli.jsonable({"a": float("inf"), "b": [float("-inf"), 1]}) == {"a": "inf", "b": ["-inf", 1]}


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "onesided", "solve", "--spec", _write(tmp_path, SOLVE),
                        "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0 and "solve: ok" in r.stdout


def test_bench_subset(tmp_path, capsys):
    assert cli.main(["bench", "--criteria", "1", "--out", str(tmp_path / "b")]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "1/1 criteria pass" in out
    cli.validate_report(json.loads((tmp_path / "b" / "report.json").read_text()))
