"""End-to-end checks for the batch command-line driver."""

import csv
import hashlib
import json
import math

import pytest

from magtorus.cli import main

TWO_PI = 2.0 * math.pi

COS_Y = [{"k1": 0, "k2": 1, "re": 0.5}, {"k1": 0, "k2": -1, "re": 0.5}]


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


# ---------------------------------------------------------------------------
# Success path
# ---------------------------------------------------------------------------

def test_check_mgcc_violated_strip(tmp_path):
    cfg = write_config(tmp_path, {
        "fields": {"A1": COS_Y, "A2": [], "V": []},
        "region": {"rects": [[0.0, TWO_PI, 1.2, 2.0]]},
    })
    out = tmp_path / "out"
    assert main(["check-mgcc", "--config", cfg, "--out", str(out)]) == 0

    report = json.loads((out / "mgcc_report.json").read_text())
    assert report["verdict"] == "violated"
    bad = [d for d in report["directions"] if d["verdict"] == "violated"]
    assert any(d["p"] == 1 and d["q"] == 0 for d in bad)

    rows = read_csv(out / "mgcc_report.csv")
    assert rows[0] == ["p", "q", "verdict", "n_crit", "covered", "ell"]
    assert len(rows) > 1

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "check-mgcc"
    assert manifest["summary"]["verdict"] == "violated"
    with open(cfg, "rb") as f:
        assert manifest["config_sha256"] == hashlib.sha256(f.read()).hexdigest()
    assert manifest["wall_time_s"] >= 0.0
    assert "magtorus" in manifest["versions"]
    assert "numpy" in manifest["versions"]


def test_gcc_full_torus_and_strip(tmp_path):
    cfg = write_config(tmp_path, {"region": "full"})
    out = tmp_path / "full"
    assert main(["gcc", "--config", cfg, "--out", str(out)]) == 0
    assert json.loads((out / "gcc_report.json").read_text())["holds"] is True

    cfg2 = write_config(tmp_path, {
        "region": {"rects": [[0.0, TWO_PI, 1.2, 2.0]]}}, "strip.json")
    out2 = tmp_path / "strip"
    assert main(["gcc", "--config", cfg2, "--out", str(out2)]) == 0
    report = json.loads((out2 / "gcc_report.json").read_text())
    assert report["holds"] is False
    assert {"p": 1, "q": 0} == {k: report["offenders"][0][k] for k in ("p", "q")}


def test_obs_constant_full_torus(tmp_path):
    # on the full torus the mass matrix is the identity, so the Gramian is
    # T times the identity and the constant is 1/lambda_min = 1/T
    cfg = write_config(tmp_path, {
        "fields": {"A1": COS_Y, "A2": [], "V": []},
        "region": "full",
        "basis": {"N": 6},
        "obs": {"T": 2.0},
    })
    out = tmp_path / "out"
    assert main(["obs-constant", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "obs_constant.csv")
    assert rows[0] == ["T", "lambda_min", "C_obs", "dim"]
    T, lam, c, dim = rows[1]
    assert float(T) == 2.0
    assert abs(float(lam) - 2.0) < 1e-9
    assert abs(float(c) - 0.5) < 1e-9
    assert int(dim) == 13 * 13


def test_simulate_writes_unitary_trajectory(tmp_path):
    cfg = write_config(tmp_path, {
        "fields": {"A1": COS_Y, "A2": [], "V": []},
        "region": {"rects": [[0.0, TWO_PI, 0.0, math.pi]]},
        "basis": {"N": 6},
        "simulate": {"T": 1.0, "steps": 10, "initial_mode": [1, 0]},
    })
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["t", "norm", "energy", "region_mass"]
    assert len(rows) == 12
    norms = [float(r[1]) for r in rows[1:]]
    assert all(abs(n - 1.0) < 1e-9 for n in norms)
    energies = [float(r[2]) for r in rows[1:]]
    assert max(energies) - min(energies) < 1e-9
    masses = [float(r[3]) for r in rows[1:]]
    assert all(0.0 <= m <= 1.0 + 1e-12 for m in masses)


def test_runs_are_deterministic(tmp_path):
    cfg = write_config(tmp_path, {
        "fields": {"A1": COS_Y, "A2": [], "V": []},
        "region": {"rects": [[0.0, TWO_PI, 0.0, math.pi]]},
        "basis": {"N": 6},
        "obs": {"T": 1.0},
    })
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["obs-constant", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["obs-constant", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "obs_constant.csv").read_bytes() == \
           (out2 / "obs_constant.csv").read_bytes()


# ---------------------------------------------------------------------------
# Failure paths
# ---------------------------------------------------------------------------

def test_unknown_top_level_key_is_config_error(tmp_path):
    cfg = write_config(tmp_path, {"region": "full", "bogus": 1})
    out = tmp_path / "out"
    assert main(["gcc", "--config", cfg, "--out", str(out)]) == 2
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "config"
    assert "bogus" in err["message"]
    assert not (out / "manifest.json").exists()


def test_unknown_block_key_is_config_error(tmp_path):
    cfg = write_config(tmp_path, {
        "fields": {"A1": COS_Y, "A2": [], "V": []},
        "region": "full",
        "basis": {"N": 6, "M": 3},
        "obs": {"T": 1.0},
    })
    assert main(["obs-constant", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 2


def test_missing_block_is_config_error(tmp_path):
    cfg = write_config(tmp_path, {"region": "full", "basis": {"N": 6}})
    assert main(["obs-constant", "--config", cfg,
                 "--out", str(tmp_path / "out")]) == 2


def test_unreadable_config_is_config_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["gcc", "--config", str(path),
                 "--out", str(tmp_path / "out")]) == 2
    assert main(["gcc", "--config", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "out2")]) == 2


def test_undersized_basis_is_numerical_error(tmp_path):
    # cos y in A1 makes |A|^2 bandwidth 2, so N = 2 trips the truncation guard
    cfg = write_config(tmp_path, {
        "fields": {"A1": COS_Y, "A2": [], "V": []},
        "region": "full",
        "basis": {"N": 2},
        "obs": {"T": 1.0},
    })
    out = tmp_path / "out"
    assert main(["obs-constant", "--config", cfg, "--out", str(out)]) == 3
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "numerical-precondition"


def test_bad_argv_raises_system_exit(tmp_path):
    with pytest.raises(SystemExit):
        main(["not-a-command", "--config", "x", "--out", "y"])
    with pytest.raises(SystemExit):
        main(["gcc"])
