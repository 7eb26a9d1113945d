import csv
import json

import pytest

from quadpie.benchmarks import burgers
from quadpie.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, EXIT_UNKNOWN, main, run

REQUIRED = {"schema_version", "tool", "version", "python", "command", "config", "verdict", "timings"}


def test_analyze_certified(tmp_path):
    out = tmp_path / "r.json"
    code, report = run(["analyze", "--benchmark", "burgers", "--r", "5", "--out", str(out)])
    assert code == EXIT_OK
    assert REQUIRED <= set(report)
    assert report["verdict"] == "stable-certified"
    assert report["residuals"]["passed"] is True
    assert report["settings"]["degrees"] == [2, 2]
    saved = json.loads(out.read_text())
    assert saved["schema_version"] == "1.0" and saved["config"]["r"] == "5"


def test_analyze_not_certified():
    code, report = run(["analyze", "--benchmark", "burgers", "--r", "12", "--degrees", "1", "1"])
    assert code in (EXIT_INFEASIBLE, EXIT_UNKNOWN)
    assert report["verdict"] in ("infeasible-at-degree", "unknown")


def test_presets_and_overrides():
    code, report = run(["analyze", "--benchmark", "kdv", "--r", "1", "--degrees", "2", "2"])
    assert code == EXIT_OK
    assert report["settings"]["klin_tol"] == 1e-8
    code, report = run(["analyze", "--benchmark", "kdv", "--r", "1", "--degrees", "2", "2", "--klin-tol", "0"])
    assert code != EXIT_OK


def test_spec_file_with_parameter(tmp_path):
    spec = burgers(0).to_json()
    spec["alpha"][0] = "{r}"
    path = tmp_path / "b.json"
    path.write_text(json.dumps(spec))
    code, report = run(["analyze", "--spec", str(path), "--r", "3/2", "--degrees", "1", "1"])
    assert code == EXIT_OK and report["problem"]["r"] == "3/2"


@pytest.mark.parametrize(
    "text",
    ['{"order": 2', '{"order": 2, "domain": [0, 1], "alpha": [0, 0, "q"], "bc": [[1,0,0,0],[0,0,1,0]]}'],
)
def test_malformed_spec(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    code, report = run(["analyze", "--spec", str(path)])
    assert code == EXIT_INPUT
    assert report["verdict"] == "input-error"


def test_ill_posed_and_missing_inputs(tmp_path):
    spec = burgers(0).to_json()
    spec["bc"] = [["0", "1", "0", "0"], ["0", "0", "0", "1"]]
    path = tmp_path / "neumann.json"
    path.write_text(json.dumps(spec))
    assert run(["analyze", "--spec", str(path)])[0] == EXIT_INPUT
    assert run(["analyze", "--spec", str(tmp_path / "nope.json")])[0] == EXIT_INPUT
    assert run(["analyze"])[0] == EXIT_INPUT
    assert run(["analyze", "--benchmark", "heat"])[0] == EXIT_INPUT
    assert run(["analyze", "--benchmark", "burgers", "--r", "x"])[0] == EXIT_INPUT
    assert run(["analyze", "--benchmark", "burgers", "--eps", "-1"])[0] == EXIT_INPUT
    assert run(["sweep", "--spec", str(path)])[0] == EXIT_INPUT


def test_simulate_writes_csv(tmp_path):
    path = tmp_path / "t.csv"
    code, report = run([
        "simulate", "--benchmark", "burgers", "--r", "5", "--n", "16", "--dt", "1e-3",
        "--t-end", "0.1", "--save-every", "10", "--csv", str(path), "--certificate", "--degrees", "1", "1",
    ])
    assert code == EXIT_OK and report["verdict"] == "completed"
    traj = report["trajectory"]
    assert traj["u_norm"][0] == pytest.approx(1.0)
    assert traj["max_envelope_violation"] <= 0
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 11 and rows[3]["V"] != ""
    assert run(["simulate", "--benchmark", "burgers", "--n", "2"])[0] == EXIT_INPUT


def test_simulate_blow_up(tmp_path):
    spec = burgers(0).to_json()
    spec["alpha"][0] = "100"  # linear growth at rate 100 - pi^2, no saturating term
    spec["beta"] = []
    path = tmp_path / "grow.json"
    path.write_text(json.dumps(spec))
    code, report = run(["simulate", "--spec", str(path), "--n", "12", "--t-end", "2", "--dt", "1e-3"])
    assert code == EXIT_UNKNOWN and report["verdict"] == "blow-up"


def test_selftest_and_main(tmp_path, capsys):
    code, report = run(["selftest", "--instances", "3"])
    assert code == EXIT_OK
    assert all(c["passed"] for c in report["checks"])
    assert main(["selftest", "--instances", "2", "--out", str(tmp_path / "s.json")]) == 0
    assert "PASS" in capsys.readouterr().out


def test_export(tmp_path):
    path = tmp_path / "k.dat-s"
    code, report = run(["export", "--benchmark", "kdv", "--r", "1", "--degrees", "1", "1", "--sdpa", str(path)])
    assert code == EXIT_OK and report["settings"]["klin_tol"] == 0.0
    assert path.read_text().splitlines()[1] == "2 = nBLOCK"
    assert run(["export", "--benchmark", "kdv", "--klin-tol", "1e-8", "--sdpa", str(path)])[0] == EXIT_INPUT


def test_sweep_command():
    code, report = run(["sweep", "--benchmark", "burgers", "--degrees", "1", "1", "--bracket", "0", "12", "--tol-r", "1"])
    assert code == EXIT_OK
    th = report["thresholds"]
    assert th["r_star"] < th["r_fail"] <= th["r_star"] + 1
    code, report = run(["sweep", "--benchmark", "burgers", "--degrees", "1", "1", "--bracket", "0", "1"])
    assert code == EXIT_UNKNOWN and "widen" in report["detail"]
