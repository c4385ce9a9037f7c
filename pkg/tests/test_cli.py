import copy
import json

import numpy as np
import pytest

import bohm2p.dynamics
from bohm2p.cli import main
from bohm2p.scenario import builtin_scenarios, load_config, validate_config
from bohm2p.errors import ConfigError


def small_gaussian_config(**overrides):
    cfg = copy.deepcopy(builtin_scenarios()["gaussian-different-slits"])
    cfg["sampler"]["n_samples"] = 300
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_scenarios_lists_builtins(capsys):
    assert main(["scenarios"]) == 0
    out = capsys.readouterr().out
    for name in ("gaussian-different-slits", "plane-wave-grid",
                 "oscillator-pair", "gaussian-product"):
        assert name in out


def test_run_small_gaussian_scenario(tmp_path):
    cfg = small_gaussian_config()
    path = write_config(tmp_path, cfg)
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out)]) == 0
    for fname in ("trajectories.csv", "marginals.csv", "report.json"):
        assert (out / fname).exists()
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] is True
    # one result per configured check, in order
    assert len(report["checks"]) == len(cfg["checks"])
    header = (out / "trajectories.csv").read_text().splitlines()[0]
    assert header == "pair_id,t,x1,y1,x2,y2,status"
    header = (out / "marginals.csv").read_text().splitlines()[0]
    assert header == "coordinate,t,bin_low,bin_high,count,quantum_density"


def test_outputs_byte_identical_across_runs_and_threads(tmp_path):
    path = write_config(tmp_path, small_gaussian_config())
    dirs = [tmp_path / f"out{i}" for i in range(3)]
    assert main(["run", str(path), "--out", str(dirs[0])]) == 0
    assert main(["run", str(path), "--out", str(dirs[1])]) == 0
    assert main(["run", str(path), "--out", str(dirs[2]), "--threads", "3"]) == 0
    for fname in ("trajectories.csv", "marginals.csv", "report.json"):
        blobs = [(d / fname).read_bytes() for d in dirs]
        assert blobs[0] == blobs[1] == blobs[2]


def test_seed_override_changes_outputs(tmp_path):
    path = write_config(tmp_path, small_gaussian_config())
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["run", str(path), "--out", str(a)]) == 0
    assert main(["run", str(path), "--out", str(b), "--seed", "7"]) == 0
    assert (a / "trajectories.csv").read_bytes() != (b / "trajectories.csv").read_bytes()


def test_malformed_config_exits_two_and_names_field(tmp_path, capsys):
    cfg = small_gaussian_config()
    cfg["model"]["sigma0"] = -1.0
    path = write_config(tmp_path, cfg)
    assert main(["run", str(path)]) == 2
    err = capsys.readouterr().err
    assert "model.sigma0" in err


def test_unknown_scenario_exits_two(capsys):
    assert main(["run", "no-such-scenario"]) == 2
    assert "config" in capsys.readouterr().err


def test_plane_wave_scenario_runs(tmp_path):
    assert main(["run", "plane-wave-grid", "--out", str(tmp_path / "pw")]) == 0
    report = json.loads((tmp_path / "pw" / "report.json").read_text())
    names = [c["name"] for c in report["checks"]]
    assert names == ["x_constancy"]
    assert report["checks"][0]["measured"] < 1e-9


def test_check_fast_passes(capsys):
    assert main(["check", "--fast"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_check_json_output(capsys):
    assert main(["check", "--fast", "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert all(c["passed"] for c in payload["checks"])
    assert len(payload["checks"]) == 6


def test_check_empty_suite_list(tmp_path, capsys):
    path = tmp_path / "empty.json"
    path.write_text(json.dumps({"suites": []}))
    assert main(["check", str(path)]) == 0
    assert "no check suites requested" in capsys.readouterr().out


def test_check_selected_suite(tmp_path, capsys):
    path = tmp_path / "one.json"
    path.write_text(json.dumps({"suites": ["exchange_covariance"],
                                "n_points": 50}))
    assert main(["check", str(path)]) == 0
    out = capsys.readouterr().out
    assert "exchange_covariance" in out


def test_check_detects_seeded_perturbation(monkeypatch, capsys):
    # Mutation sanity: corrupt the closed-form velocity sum and make sure the
    # cross-check suite notices.
    true_fn = bohm2p.dynamics.velocity_sum_x

    def wrong_sign(model, p, node_epsilon=1e-12):
        value = true_fn(model, p, node_epsilon)
        tau = float(model.spread_ratio(p.t))
        rate = model.constants.hbar / (2 * model.constants.mass * model.sigma0**2)
        spreading = rate * rate * (p.r1[0] + p.r2[0]) * p.t / (1 + tau * tau)
        return value - 2.0 * spreading

    monkeypatch.setattr(bohm2p.dynamics, "velocity_sum_x", wrong_sign)
    assert main(["check", "--fast"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "velocity_sum_identity" in out


def test_sample_command_writes_csv(tmp_path):
    cfg = small_gaussian_config()
    cfg["sampler"]["n_samples"] = 50
    path = write_config(tmp_path, cfg)
    out = tmp_path / "s"
    assert main(["sample", str(path), "--out", str(out)]) == 0
    lines = (out / "samples.csv").read_text().splitlines()
    assert lines[0] == "pair_id,x1,y1,x2,y2"
    assert len(lines) == 51


def test_sample_rejects_plane_wave_scenario(capsys):
    assert main(["sample", "plane-wave-grid"]) == 2
    assert "sampler" in capsys.readouterr().err


def test_env_threads_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("BOHM2P_THREADS", "2")
    path = write_config(tmp_path, small_gaussian_config())
    assert main(["run", str(path), "--out", str(tmp_path / "env")]) == 0


def test_validate_rejects_off_grid_check_time():
    cfg = small_gaussian_config()
    cfg["checks"].append({"type": "detection_agreement", "region": "upper",
                          "time": 3.33})
    with pytest.raises(ConfigError, match="time"):
        validate_config(cfg)


def test_validate_rejects_unknown_region():
    cfg = small_gaussian_config()
    cfg["checks"].append({"type": "detection_agreement", "region": "nowhere",
                          "time": 1.0})
    with pytest.raises(ConfigError, match="nowhere"):
        validate_config(cfg)


def test_validate_requires_points_for_plane_waves():
    cfg = copy.deepcopy(builtin_scenarios()["plane-wave-grid"])
    del cfg["initial_points"]
    with pytest.raises(ConfigError, match="initial_points"):
        validate_config(cfg)


def test_load_config_roundtrip():
    cfg = validate_config(load_config("oscillator-pair"))
    assert cfg["model"]["variant"] == "oscillator"
    assert cfg["time_grid"]["n_times"] == 41
