import json
import subprocess
import sys
from pathlib import Path

import pytest

from stickywet.cli import main

ROOT = Path(__file__).resolve().parents[1]

SMALL = {"model": {"N": 1, "s": 1.0}, "scheme": {"h": 0.1, "L": 4.0, "steps": 2000},
         "sampler": {"sweeps": 200}, "diagnostics": {"target": "chain"}, "replicas": 4,
         "master_seed": 5}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_simulate_writes_artifacts(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "run")])
    assert code in (0, 1)
    out = tmp_path / "run"
    for name in ("occupancy.csv", "summary.json", "manifest.json"):
        assert (out / name).exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "completed" and man["exit_code"] == code
    assert all(v in ("completed", "skipped") for v in man["stages"].values())
    assert len(man["replica_seeds"]) == 4
    assert capsys.readouterr().out.strip().splitlines()[-1] in ("PASS", "FAIL")


def test_simulate_is_reproducible(tmp_path):
    cfg = write(tmp_path, SMALL)
    for d in ("a", "b"):
        main(["simulate", "--config", cfg, "--out", str(tmp_path / d), "--threads", "2"])
    for name in ("occupancy.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "6"])
    assert (tmp_path / "a" / "summary.json").read_bytes() != \
        (tmp_path / "c" / "summary.json").read_bytes()


def test_config_errors_exit_2(tmp_path, capsys):
    bad = write(tmp_path, {"model": {"s": 0}})
    assert main(["simulate", "--config", bad, "--out", str(tmp_path / "x")]) == 2
    assert "gibbs" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", "x"]) == 2
    assert main(["simulate", "--config", write(tmp_path, SMALL), "--out", "x",
                 "--threads", "0"]) == 2
    assert main(["frobnicate"]) == 2


def test_runtime_errors_exit_3(tmp_path):
    doc = dict(SMALL, diagnostics={"qv": True})  # too few interior steps for the QV check
    code = main(["simulate", "--config", write(tmp_path, doc), "--out", str(tmp_path / "r")])
    assert code == 3
    man = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert man["stages"]["diagnostics"] == "failed"
    assert man["errors"][0]["type"] == "InsufficientData"


def test_oracles(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["oracle", "masses", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("mask")
    assert main(["oracle", "chain", "--config", cfg]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0] == "mask,chain_mass,revuz_mass" and len(rows) == 3


def test_check_forms(tmp_path, capsys):
    cfg = write(tmp_path, {"model": {"N": 1, "s": 0.7}})
    assert main(["check", "forms", "--config", cfg]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["passed"] and len(rep["pairs"]) == 30


def test_sample_gibbs(tmp_path, capsys):
    cfg = write(tmp_path, dict(SMALL, model={"N": 2, "s": 0.5}, scheme={"h": 0.1, "L": 5.0}))
    assert main(["sample", "gibbs", "--config", cfg, "--draws", "50",
                 "--out", str(tmp_path / "g")]) == 0
    states = (tmp_path / "g" / "states.csv").read_text().splitlines()
    assert states[0] == "phi1,phi2" and len(states) == 51
    assert main(["sample", "gibbs", "--config", cfg, "--draws", "0"]) == 2


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, SMALL)
    proc = subprocess.run([sys.executable, "-m", "stickywet.cli", "oracle", "masses",
                           "--config", cfg], capture_output=True, text=True, cwd=ROOT)
    assert proc.returncode == 0 and proc.stdout.startswith("mask")
