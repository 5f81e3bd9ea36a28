import json
from pathlib import Path

import pytest

from bmkam.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path), "--quiet"])


def test_simulate_system(tmp_path):
    assert _run(tmp_path, "simulate", "--config", str(CONFIGS / "b2_pendulum_simulate.json")) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["energy_drift"] < 1e-10 and not s["halted"]
    assert (tmp_path / "trajectory.csv").read_text().startswith("t,phi_1,phi_2,I_1,I_2,H")


def test_three_body(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"preset": "three_body", "t_end": 1.0, "dt": 0.001}))
    assert _run(tmp_path, "simulate", "--config", str(cfg)) == 0


def test_desing(tmp_path):
    assert _run(tmp_path, "desing", "--config", str(CONFIGS / "desing_odd.json")) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert all(r["residual"] < 1e-9 for r in rep["reports"])


def test_resonances(tmp_path):
    assert _run(tmp_path, "resonances", "--config", str(CONFIGS / "desk_resonances.json")) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert 0 < s["kept_fraction"] <= 1
    assert (tmp_path / "zones.csv").exists()


def test_kam_strict_failure(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"preset": "desk", "q_max": 2}))
    code = _run(tmp_path, "kam", "--config", str(cfg), "--strict")
    assert code == 3
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["kind"] == "HypothesisViolated"
    assert (tmp_path / "iterations.jsonl").exists()


@pytest.mark.parametrize("doc,code", [("{not json", 2), ('{"preset": "nope"}', 2), ('{"t_end": -1}', 2)])
def test_config_errors(tmp_path, doc, code):
    cfg = tmp_path / "c.json"
    cfg.write_text(doc)
    assert _run(tmp_path, "simulate", "--config", str(cfg)) == code
    assert json.loads((tmp_path / "error.json").read_text())["exit_code"] == code


def test_missing_config(tmp_path):
    assert _run(tmp_path, "kam", "--config", str(tmp_path / "absent.json")) == 2
