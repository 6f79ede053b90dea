import json
import shutil
import subprocess
import sys
from pathlib import Path

import pandas as pd
import pytest

from gridnwa.cli import main

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def write_cfg(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def two_bus_cfg(tmp_path, **dispatch):
    d = {"india_mode": True, "allow_storage": True, "allow_upgrades": True,
         "allow_nonserved": True, "demand_factor": 1.0, **dispatch}
    return write_cfg(tmp_path, {
        "paths": {"network": str(ROOT / "src/gridnwa/data/two_bus.json"),
                  "demand": str(CONFIGS / "two_bus_flat.csv")},
        "dispatch": d})


def small_sim_cfg(tmp_path):
    data = json.loads((CONFIGS / "sample_feeder.json").read_text())
    data["simulate"]["n_trajectories"] = 25
    return write_cfg(tmp_path, data)


def test_optimize_two_bus_zero_investment(tmp_path):
    out = tmp_path / "run"
    assert main(["optimize", "--config", str(CONFIGS / "two_bus.json"), "--out", str(out)]) == 0
    design = json.loads((out / "design.json").read_text())
    assert design["storage"] == [] and design["line_upgrades_mw"] == {}
    assert design["upgraded_km"] == 0 and design["nonserved_mwh"] == 0
    assert design["certified"] is True
    df = pd.read_csv(out / "dispatch.csv")
    assert len(df) == 8760
    assert all(c == "hour_of_year" or c.endswith(("_mw", "_mwh", "_h")) for c in df.columns)


def test_manifest_records_hash_and_is_append_only(tmp_path):
    out = tmp_path / "run"
    cfg = str(CONFIGS / "two_bus.json")
    assert main(["optimize", "--config", cfg, "--out", str(out)]) == 0
    assert main(["value", "--config", str(CONFIGS / "sample_feeder.json"), "--out", str(out)]) == 0
    assert main(["optimize", "--config", cfg, "--out", str(out)]) == 0  # idempotent: no new entry
    runs = json.loads((out / "manifest.json").read_text())["runs"]
    assert [r["command"] for r in runs] == ["optimize", "value"]
    assert len(runs[0]["config_sha256"]) == 64
    assert set(runs[0]["artifacts"]) == {"design.json", "dispatch.csv"}
    assert runs[1]["seed"] == 42


def test_value_signs_match_table5(tmp_path):
    out = tmp_path / "v"
    assert main(["value", "--config", str(CONFIGS / "sample_feeder.json"), "--out", str(out)]) == 0
    res = json.loads((out / "option_values.json").read_text())
    signs = {r["scenario"]: r["option_value_usd_per_yr"] > 0 for r in res["scenarios"]}
    assert signs == {"low": True, "mid": True, "high": False}


def test_simulate_seed_42_byte_identical(tmp_path):
    cfg = str(small_sim_cfg(tmp_path))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--seed", "42", "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--seed", "42", "--out", str(b)]) == 0
    assert (a / "trajectories.jsonl").read_bytes() == (b / "trajectories.jsonl").read_bytes()
    first = json.loads((a / "trajectories.jsonl").read_text().splitlines()[0])
    for key in ("period", "state", "action", "storage_power_kw", "storage_energy_kwh",
                "upgraded_km", "stage_cost_usd_per_yr", "cumulative_discounted_cost_usd"):
        assert key in first


def test_report_after_optimize_and_simulate(tmp_path):
    out = tmp_path / "r"
    assert main(["report", "--config", str(CONFIGS / "two_bus.json"), "--out", str(out)]) == 2
    assert json.loads((out / "error.json").read_text())["exit_code"] == 2
    cfg = str(small_sim_cfg(tmp_path))
    assert main(["optimize", "--config", str(CONFIGS / "two_bus.json"), "--out", str(out)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert main(["report", "--config", cfg, "--out", str(out)]) == 0
    fig7 = pd.read_csv(out / "fig_trajectory.csv")
    assert {"year", "no_action_count", "storage_nwa_count", "traditional_upgrade_count"} <= set(fig7)
    assert (fig7[["no_action_count", "storage_nwa_count", "traditional_upgrade_count"]]
            .sum(axis=1).iloc[0] == 25)
    assert len(pd.read_csv(out / "fig_dispatch.csv")) == 8760


def test_matrix_command(tmp_path):
    out = tmp_path / "m"
    assert main(["matrix", "--config", str(CONFIGS / "sample_feeder.json"), "--out", str(out)]) == 0
    assert (out / "transition_matrix.json").exists() and (out / "transition_matrix.csv").exists()


@pytest.mark.parametrize("make", [
    lambda t: t / "missing.json",
    lambda t: write_cfg(t, {"bogus": 1}),
    lambda t: write_cfg(t, {"dispatch": {"india_mode": True, "colour": "red"}}),
    lambda t: write_cfg(t, {"paths": {"network": str(t / "nope.json")}}),
])
def test_validation_errors_exit_2(tmp_path, make, capsys):
    out = tmp_path / "e"
    assert main(["optimize", "--config", str(make(tmp_path)), "--out", str(out)]) == 2
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["exit_code"] == 2 and rec["command"] == "optimize"


def test_stochastic_command_needs_seed(tmp_path):
    cfg = write_cfg(tmp_path, {"simulate": {"n_trajectories": 1}})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_infeasible_design_exit_3(tmp_path):
    cfg = two_bus_cfg(tmp_path, allow_storage=False, allow_upgrades=False,
                      allow_nonserved=False, demand_factor=2.0)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["error_type"] == "DesignInfeasibleError"


def test_non_convergence_exit_4(tmp_path):
    cfg = write_cfg(tmp_path, {"seed": 1, "mcmc": {"chain_length": 1000, "tol": 1e-12,
                                                   "max_iterations": 2000}})
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["diagnostic"] > 0


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("gridnwa")
    cmd = [exe] if exe else [sys.executable, "-m", "gridnwa.cli"]
    r = subprocess.run(cmd + ["value", "--config", str(CONFIGS / "sample_feeder.json"),
                              "--out", str(tmp_path / "s")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run(cmd + ["value", "--config", str(tmp_path / "nope.json")],
                       capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode == 2
