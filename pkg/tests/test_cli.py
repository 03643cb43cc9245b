import json
import math
from pathlib import Path

import numpy as np
import pytest

from certctrl.cli import EXIT_CONFIG, EXIT_OK, EXIT_UNDECIDED, main, run


def _run_cli(tmp_path, task, config, extra=()):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / "out"
    code = main([task, "--config", str(cfg), "--out", str(out), *extra])
    record = json.loads((out / "certificate.json").read_text()) if (out / "certificate.json").exists() else None
    return code, record, out


ODE_DECAY = {
    "blocks": [{"t_lo": "0", "t_hi": "1", "f": {"form": "polynomial", "coeffs": [0.0, -1.0]}}],
    "state_box": [-2, 2],
    "x0": [1.0],
    "T": 1.0,
    "eps": 1e-5,
}

CERTIFY_DECAY = {
    "dynamics": {"form": "polynomial", "coeffs": [0.0, -1.0]},
    "V": {"form": "polynomial", "coeffs": [0.0, 0.0, 1.0]},
    "w1": {"form": "radial_poly", "coeffs": [0.0, 0.5]},
    "w2": {"form": "radial_poly", "coeffs": [2.0]},
    "w3": {"form": "radial_poly", "coeffs": [0.0, 1.0]},
    "xi": 1.0,
    "state_box": [-1, 1],
    "mesh_eps": 0.002,
    "t_samples": [0.0],
}


def test_certify_demo_exits_zero(tmp_path):
    code, record, _ = _run_cli(tmp_path, "certify", CERTIFY_DECAY)
    assert code == EXIT_OK
    assert record["verdict"] == "certified"
    assert record["numeric"]["x0_level"] == pytest.approx(0.5, abs=0.01)


def test_certify_unstable_counterexample_exit(tmp_path):
    cfg = dict(CERTIFY_DECAY, dynamics={"form": "polynomial", "coeffs": [0.0, 1.0]})
    code, record, _ = _run_cli(tmp_path, "certify", cfg)
    assert code == 1
    assert record["verdict"] == "counterexample"
    assert record["payload"]["counterexample"]["check"] == "decay"


def test_eig_rotation_matrix_file_undecided(tmp_path):
    mat = tmp_path / "rot.txt"
    mat.write_text("0,0 -1,0\n1,0 0,0\n")
    code, record, out = _run_cli(tmp_path, "eig", {"matrix_file": str(mat), "eps": 1e-8})
    assert code == EXIT_UNDECIDED
    assert record["verdict"] == "undecided"
    assert (out / "roots.csv").exists()


def test_eig_stable_matrix_exit_zero(tmp_path):
    code, record, _ = _run_cli(tmp_path, "eig", {"matrix": [[-1.0, 0.0], [0.0, -2.0]]})
    assert code == EXIT_OK
    assert record["numeric"]["max_residual"] <= 1e-8


def test_ode_decay_trajectory(tmp_path):
    code, record, out = _run_cli(tmp_path, "ode", ODE_DECAY)
    assert code == EXIT_OK
    assert abs(record["numeric"]["endpoint"] - math.exp(-1)) <= 1e-5
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x1,error_bound"
    assert len(lines) > 100


def test_malformed_config_exit_64(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert main(["ode", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_unknown_form_reference_exit_64_lists_registry(tmp_path, capsys):
    cfg = dict(ODE_DECAY)
    cfg["blocks"] = [{"t_lo": 0, "t_hi": 1, "f": {"form": "mystery", "coeffs": [1]}}]
    code, record, _ = _run_cli(tmp_path, "ode", cfg)
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "polynomial" in err and "trig" in err


def test_missing_config_exit_64():
    assert main(["ode"]) == EXIT_CONFIG


def test_evt_min_subcommand(tmp_path):
    config = {
        "policy_class": {"domain": [0, 1], "lipschitz": 1.0, "bound": 1.0},
        "functional": {"kind": "sup_distance", "target": {"form": "polynomial", "coeffs": [0.0]}},
        "eps": 1.3,
    }
    code, record, out = _run_cli(tmp_path, "evt-min", config)
    assert code == EXIT_OK
    assert record["numeric"]["value"] - record["numeric"]["radius"] <= 0.0 + 1e-12
    assert (out / "policy.txt").exists()


def test_danskin_subcommand_writes_audit(tmp_path):
    config = {
        "objective": "bilinear",
        "x": 0.0,
        "v": 1.0,
        "delta": 0.3,
        "h_sequence": [0.1, 0.01, 0.001],
    }
    code, record, out = _run_cli(tmp_path, "danskin", config)
    assert code == EXIT_OK
    assert record["numeric"]["derivative"] == pytest.approx(1.0, abs=0.05)
    assert (out / "audit.csv").read_text().startswith("h,quotient,lower,upper")


def test_selector_subcommand(tmp_path):
    config = {
        "domain_blocks": [["-1", "0"], ["0", "1"]],
        "chunks": [
            [{"alpha": {"form": "polynomial", "coeffs": [0.0]},
              "beta": {"form": "polynomial", "coeffs": [0.25]}}],
            [{"alpha": {"form": "polynomial", "coeffs": [0.75]},
              "beta": {"form": "polynomial", "coeffs": [1.0]}}],
        ],
        "value_range": [0, 1],
        "eps": 0.125,
        "samples": 300,
    }
    code, record, out = _run_cli(tmp_path, "selector", config)
    assert code == EXIT_OK
    assert record["numeric"]["max_distance"] <= 0.125
    assert record["numeric"]["proper"] == 1
    assert (out / "selector.csv").exists()


def test_shh_subcommand_with_sweep(tmp_path):
    config = {
        "dynamics": "integrator",
        "control_box": [-1, 1],
        "state_box": [-2, 2],
        "target_radius": 0.1,
        "overshoot_radius": 1.0,
        "optimizer_eps": 0.01,
        "eta_max": 1.0,
        "sweep": [0.01, 0.1],
        "resolution": 0.002,
    }
    code, record, out = _run_cli(tmp_path, "shh", config)
    assert code == EXIT_OK
    assert record["numeric"]["eta"] > 0
    sweep = (out / "sweep.csv").read_text().splitlines()
    assert sweep[0] == "optimizer_eps,eta,margin"
    assert len(sweep) == 3


def test_audit_runs_and_passes(tmp_path):
    out = tmp_path / "out"
    code = main(["audit", "--seed", "7", "--out", str(out)])
    assert code == EXIT_OK
    record = json.loads((out / "certificate.json").read_text())
    assert record["verdict"] == "certified"
    assert record["numeric"]["core_worst_soundness_gap"] <= 0.0


def test_audit_deterministic_numeric_fields(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["audit", "--seed", "11", "--out", str(out)]) == EXIT_OK
        rec = json.loads((out / "certificate.json").read_text())
        outs.append(json.dumps(rec["numeric"], sort_keys=True))
    assert outs[0] == outs[1]


def test_precision_audit_flag(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(ODE_DECAY))
    out = tmp_path / "out"
    code = main(["ode", "--config", str(cfg), "--out", str(out), "--precision-audit"])
    assert code == EXIT_OK
    rec = json.loads((out / "certificate.json").read_text())
    assert rec["precision_audit"]["eigen_mp_sound"] == 1.0
    assert rec["precision_audit"]["core_exact_sound"] == 1.0


def test_workers_flag_accepted(tmp_path):
    out = tmp_path / "out"
    code = main(["audit", "--seed", "3", "--workers", "2", "--out", str(out)])
    assert code == EXIT_OK


def test_shh_failure_exit_one_with_diagnosis(tmp_path):
    config = {
        "dynamics": "integrator",
        "control_box": [-1, 1],
        "state_box": [-2, 2],
        "target_radius": 0.1,
        "overshoot_radius": 1.0,
        "optimizer_eps": 0.5,
        "eta_max": 1.0,
        "resolution": 0.004,
    }
    code, record, _ = _run_cli(tmp_path, "shh", config)
    assert code == 1
    assert record["verdict"] == "failure"
    assert record["payload"]["diagnosis"].startswith("optimizer_tolerance")
