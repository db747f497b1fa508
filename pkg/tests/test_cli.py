import csv
import json
import subprocess
import sys

import pytest

from agpwaves.cli import COMMANDS, RESULT_SCHEMA, config_hash, main


def _write(path, cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


def _result(out):
    return json.loads((out / "result.json").read_text())


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


QUICK_CASES = {
    "sample-noise": ({"dim": 2, "cutoff": 8}, ["noise.json", "noise.csv"]),
    "eigen": ({"dim": 1, "cutoff": 32, "count": 3, "probe_trials": 20}, ["eigenvalues.csv", "phi0.csv"]),
    "energy-gs": ({"dim": 1, "cutoff": 48, "mass": 0.5}, ["groundstate.json", "field.csv"]),
    "action-gs": ({"dim": 1, "cutoff": 48, "omega_shift": 1.0}, ["groundstate.json", "field.csv"]),
    "gn": ({"dim": 1, "gn_cutoff": 64}, ["soliton.csv"]),
    "noisy-gn": ({"dim": 2, "cutoff": 16, "gn_cutoff": 40}, ["minimizer.csv"]),
    "critical-mass": ({"dim": 1, "cutoff": 64, "gamma": 2.0, "gn_cutoff": 96}, ["probe.csv"]),
    "small-mass-sweep": ({"dim": 1, "cutoff": 48, "masses": [0.1, 0.03, 0.01]}, ["sweep.csv"]),
}


@pytest.mark.parametrize("command", sorted(QUICK_CASES))
def test_every_subcommand_runs(command, tmp_path, capsys):
    cfg, files = QUICK_CASES[command]
    out = tmp_path / "out"
    code = main([command, _write(tmp_path / "c.json", cfg), "--out", str(out), "--seed", "3"])
    assert code == 0, capsys.readouterr().err
    doc = _result(out)
    assert doc["schema"] == RESULT_SCHEMA and doc["command"] == command
    assert doc["seed"] == 3 and doc["config"]["seed"] == 3
    assert doc["config_hash"] == config_hash(doc["config"])
    assert doc["passed"] is True and doc["checks"]
    for f in files:
        assert (out / f).stat().st_size > 0


def test_all_commands_covered():
    assert set(QUICK_CASES) | {"verify"} == set(COMMANDS)


def test_validation_error_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["energy-gs", _write(tmp_path / "c.json", {"gamma": 0}), "--out", str(out)])
    assert code == 2
    assert not out.exists()
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 2 and err["error"] == "UsageError" and "gamma" in err["message"]


@pytest.mark.parametrize("cfg", [{"bogus": 1}, {"solver": {"tol_residual": -1}}, {"dim": 3},
                                 {"command": "eigen"}, {"seed": -1}])
def test_invalid_configs(cfg, tmp_path):
    out = tmp_path / "out"
    assert main(["energy-gs", _write(tmp_path / "c.json", cfg), "--out", str(out)]) == 2
    assert not out.exists()


def test_unreadable_config(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    assert main(["eigen", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 2
    assert main(["eigen", str(tmp_path / "missing.json")]) == 2


def test_precondition_violation_is_exit_2(tmp_path):
    cfg = {"dim": 1, "cutoff": 32, "gamma": 1.0}
    assert main(["gn", _write(tmp_path / "c.json", cfg), "--out", str(tmp_path / "o")]) == 2


def test_supercritical_is_exit_3(tmp_path, capsys):
    cfg = {"dim": 1, "cutoff": 32, "gamma": 3.0}
    assert main(["energy-gs", _write(tmp_path / "c.json", cfg), "--out", str(tmp_path / "o")]) == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "DivergenceError"


def test_nonconvergence_is_exit_3(tmp_path):
    cfg = {"dim": 1, "cutoff": 64, "solver": {"max_iters": 1, "newton_iters": 0}, "restarts": 1}
    assert main(["energy-gs", _write(tmp_path / "c.json", cfg), "--out", str(tmp_path / "o")]) == 3


def test_small_mass_sweep_outputs(tmp_path):
    cfg = {"dim": 1, "cutoff": 128, "seed": 7, "lambda": 1.0, "gamma": 1.0}
    out = tmp_path / "o"
    assert main(["small-mass-sweep", _write(tmp_path / "c.json", cfg), "--out", str(out)]) == 0
    rows = _rows(out / "sweep.csv")
    assert rows[0] == ["m", "omega", "l2_err_to_phi0"] and len(rows) == 9
    assert float(rows[1][0]) == pytest.approx(0.1)
    assert abs(_result(out)["result"]["exponent"] - 1.0) <= 0.1


def test_csv_full_precision(tmp_path):
    out = tmp_path / "o"
    assert main(["eigen", "--quick", "--out", str(out)]) == 0
    mu = _rows(out / "eigenvalues.csv")[1][1]
    assert len(mu.replace("-", "").replace(".", "").lstrip("0").split("e")[0]) >= 15


def test_bit_identical_repeat(tmp_path):
    cfg = _write(tmp_path / "c.json", {"dim": 1, "cutoff": 48})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["energy-gs", cfg, "--out", str(a)]) == 0
    assert main(["energy-gs", cfg, "--out", str(b)]) == 0
    for f in ("result.json", "groundstate.json", "field.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_seed_changes_hash(tmp_path):
    main(["sample-noise", "--quick", "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["sample-noise", "--quick", "--out", str(tmp_path / "b"), "--seed", "2"])
    assert _result(tmp_path / "a")["config_hash"] != _result(tmp_path / "b")["config_hash"]


def test_verify_zero_noise_anchor(tmp_path):
    out = tmp_path / "v"
    cfg = {"criteria": [1]}
    assert main(["verify", _write(tmp_path / "c.json", cfg), "--quick", "--out", str(out)]) == 0
    report = (out / "report.txt").read_text()
    assert "[PASS] criterion  1 1d_mu0" in report
    assert "oscillator ground level equals 1 in 1D" in report


def test_verify_quick_profile(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--quick", "--out", str(out)]) == 0
    doc = _result(out)
    assert doc["result"]["profile"] == "quick"
    assert doc["result"]["checks_total"] >= 20 and doc["result"]["checks_failed"] == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and {c["criterion"] for c in rep["checks"]} == set(range(1, 13))
    assert all(c["statement"] for c in rep["checks"])
    assert rep["total_seconds"] <= 120


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "agpwaves", "sample-noise", "--quick",
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "result.json").exists()


def test_missing_subcommand():
    assert main([]) == 2
