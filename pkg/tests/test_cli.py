import json
import os

import pytest

from localgibbs.cli import config_hash, main, parse_config, run_verify
from localgibbs.errors import ConfigError

BASE = {
    "model": {"name": "mfi"},
    "lattice": {"extents": [3], "periodic": True},
    "beta": 0.8,
    "r": 1,
    "tau": 0.2,
    "time": 1.0,
    "backend": "dense",
    "seed": 5,
}


def write_cfg(tmp_path, overrides=None, name="cfg.json"):
    data = dict(BASE)
    data.update(overrides or {})
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_config_round_trip():
    cfg = parse_config(dict(BASE))
    again = parse_config(cfg.resolved())
    assert cfg.resolved() == again.resolved()
    assert config_hash(cfg) == config_hash(again)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        parse_config({**BASE, "bogus": 1})
    with pytest.raises(ConfigError):
        parse_config({**BASE, "model": {"name": "mfi", "oops": 2}})
    with pytest.raises(ConfigError):
        parse_config({**BASE, "gadget": {"mode": "compiled", "nope": 3}})


def test_value_validation():
    with pytest.raises(ConfigError):
        parse_config({**BASE, "tau": -0.1})
    with pytest.raises(ConfigError):
        parse_config({**BASE, "beta": -1})
    with pytest.raises(ConfigError):
        parse_config({**BASE, "noise_p": 2.0})
    with pytest.raises(ConfigError):
        parse_config({**BASE, "backend": "quantum"})
    with pytest.raises(ConfigError):
        parse_config({**BASE, "model": {"name": "tfim2d"}})  # needs 2D lattice
    with pytest.raises(ConfigError):
        parse_config({**BASE, "beta": [1, 2], "r": [1, 2], "tau": [0.1, 0.2]})


def test_exit_code_2_on_bad_config(tmp_path, capsys):
    path = write_cfg(tmp_path, {"backend": "bogus"})
    assert main(["evolve", "--config", path]) == 2


def test_exit_code_2_on_missing_config():
    assert main(["evolve"]) == 2


def test_evolve_byte_identical(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    path = write_cfg(tmp_path)
    assert main(["evolve", "--config", path, "--out", str(out1)]) == 0
    assert main(["evolve", "--config", path, "--out", str(out2)]) == 0
    ts1 = (out1 / "timeseries.csv").read_bytes()
    ts2 = (out2 / "timeseries.csv").read_bytes()
    assert ts1 == ts2
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1 == m2


def test_csv_header_and_schema(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "run"
    main(["evolve", "--config", path, "--out", str(out)])
    lines = (out / "timeseries.csv").read_text().splitlines()
    assert lines[0].startswith("# localgibbs csv schema=1")
    assert "seed=5" in lines[0]
    assert "config=" in lines[0]
    assert lines[1].split(",")[:3] == ["t", "E", "dE"]
    assert len(lines) == 2 + 5  # comment + header + 5 steps


def test_manifest_contents(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "run"
    main(["evolve", "--config", path, "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == 1
    assert manifest["seed"] == 5
    cfg = parse_config(manifest["config"])
    assert manifest["config_sha256"] == config_hash(cfg)
    assert manifest["outputs"] == ["timeseries.csv"]


def test_seed_override(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "run"
    main(["evolve", "--config", path, "--out", str(out), "--seed", "99"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 99


def test_sweep_two_axes(tmp_path):
    path = write_cfg(tmp_path, {"beta": [0.5, 1.0], "r": [0, 1], "time": 0.4})
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", path, "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 2 + 4  # Cartesian product of 2 x 2
    header = lines[1].split(",")
    assert header[:2] == ["beta", "r"]


def test_sweep_requires_grid(tmp_path):
    path = write_cfg(tmp_path)
    assert main(["sweep", "--config", path]) == 2


def test_evolve_rejects_grid(tmp_path):
    path = write_cfg(tmp_path, {"beta": [0.5, 1.0]})
    assert main(["evolve", "--config", path]) == 2


def test_model_and_lindblad_commands(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "m"
    assert main(["model", "--config", path, "--out", str(out)]) == 0
    summary = json.loads((out / "model_summary.json").read_text())
    assert summary["n_sites"] == 3 and summary["terms"] == 9
    out2 = tmp_path / "l"
    assert main(["lindblad", "--config", path, "--out", str(out2)]) == 0
    lines = (out2 / "generators.csv").read_text().splitlines()
    assert len(lines) == 2 + 9  # 3 sites x 3 alphas


def test_gadget_command(tmp_path):
    path = write_cfg(tmp_path)
    out = tmp_path / "g"
    assert main(["gadget", "--config", path, "--out", str(out)]) == 0
    assert (out / "gadget_errors.csv").exists()


def test_compile_command(tmp_path):
    path = write_cfg(
        tmp_path,
        {"gadget": {"mode": "compiled", "modules": 1, "restarts": 2, "iterations": 30}},
    )
    out = tmp_path / "c"
    assert main(["compile", "--config", path, "--out", str(out)]) == 0
    compiled = json.loads((out / "compiled.json").read_text())
    assert set(compiled) == {"1", "2", "3"}
    lines = (out / "loss_traces.csv").read_text().splitlines()
    assert len(lines) == 2 + 30


def test_trajectories_backend_with_stderr_column(tmp_path):
    path = write_cfg(
        tmp_path,
        {"backend": "trajectories", "n_traj": 8, "time": 0.6, "tau": 0.2},
    )
    out = tmp_path / "t"
    assert main(["evolve", "--config", path, "--out", str(out)]) == 0
    lines = (out / "timeseries.csv").read_text().splitlines()
    assert "E_stderr" in lines[1].split(",")


def test_report_roundtrip(tmp_path, capsys):
    path = write_cfg(tmp_path)
    out = tmp_path / "run"
    main(["evolve", "--config", path, "--out", str(out)])
    assert main(["report", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "verified" in text
    # corrupt the manifest config -> hash mismatch -> exit 4
    manifest = json.loads((out / "manifest.json").read_text())
    manifest["config"]["beta"] = 9.9
    (out / "manifest.json").write_text(json.dumps(manifest))
    assert main(["report", "--out", str(out)]) == 4


def test_verify_fast_passes():
    assert run_verify("fast") == 0


def test_verify_corrupt_negative_control():
    assert run_verify("fast", corrupt_jump=True) == 4


def test_cli_verify_subcommand():
    assert main(["verify", "--level", "fast"]) == 0


def test_trajectories_with_correlators_and_heat(tmp_path):
    path = write_cfg(
        tmp_path,
        {
            "backend": "trajectories",
            "n_traj": 6,
            "time": 0.4,
            "tau": 0.2,
            "observables": ["energy", "correlators", "heat_capacity"],
        },
    )
    out = tmp_path / "tc"
    assert main(["evolve", "--config", path, "--out", str(out)]) == 0
    lines = (out / "timeseries.csv").read_text().splitlines()
    header = lines[1].split(",")
    assert "corr_l1" in header and "C_beta" in header
    assert len(lines) == 2 + 2


def test_evolve_compiled_backend(tmp_path):
    path = write_cfg(
        tmp_path,
        {
            "backend": "trajectories",
            "n_traj": 4,
            "time": 0.4,
            "tau": 0.2,
            "noise_p": 0.001,
            "gadget": {"mode": "compiled", "modules": 1, "restarts": 2, "iterations": 20},
        },
    )
    out = tmp_path / "cc"
    assert main(["evolve", "--config", path, "--out", str(out)]) == 0
    lines = (out / "timeseries.csv").read_text().splitlines()
    assert "E_stderr" in lines[1].split(",")


def test_dense_rejects_noise(tmp_path):
    path = write_cfg(tmp_path, {"noise_p": 0.01})
    assert main(["evolve", "--config", path]) == 2


def test_exit_code_3_on_resource_cap(tmp_path):
    path = write_cfg(tmp_path, {"lattice": {"extents": [13], "periodic": True}})
    assert main(["model", "--config", path, "--out", str(tmp_path / "big")]) == 3


def test_sweep_thread_count_invariant(tmp_path):
    path = write_cfg(tmp_path, {"beta": [0.5, 1.0], "time": 0.4})
    out1 = tmp_path / "s1"
    out2 = tmp_path / "s2"
    assert main(["sweep", "--config", path, "--out", str(out1), "--threads", "1"]) == 0
    assert main(["sweep", "--config", path, "--out", str(out2), "--threads", "3"]) == 0
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()
