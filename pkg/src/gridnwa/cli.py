"""``gridnwa <command> --config <path> [--seed N] [--out DIR]``.

Exit codes: 0 success, 2 validation error, 3 solver failure, 4 non-convergence.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import pandas as pd

from .config import ConfigError, RunConfig, load_config
from .demand import (DEFAULT_GROWTH, ConvergenceError, TransitionMatrix, bucket_masses,
                     build_transition_matrix, growth_samples, load_consumption_csv,
                     load_demand_csv, mcmc_fit)
from .dispatch import (DesignInfeasibleError, DispatchConfigError, DispatchHorizon,
                       DispatchOptions, SolverFailureError, dispatch_report, optimize_design, representative_weeks)
from .lp import LPModelError
from .lp.solvers import IterationLimitError
from .mdp import PlanConfig, monte_carlo
from .network import NetworkError, load_network
from .scaleup import ClassStudy, CityStudy, cost_sensitivity, dispatch_binding, sensitivity_table
from .valuation import (CostBook, NoSignChangeError, annualized_cost, breakeven_storage_cost,
                        expected_option_value, load_costbook, option_cost)

log = logging.getLogger("gridnwa")

COMMANDS = ("fit", "matrix", "optimize", "value", "simulate", "scale", "report")
EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_CONVERGENCE = 0, 2, 3, 4


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


class RunDir:
    """Output directory with a manifest of every command run into it."""

    def __init__(self, root: Path, command: str, cfg: RunConfig):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.cfg = cfg
        self.artifacts: dict[str, str] = {}

    def _record(self, name: str, data: bytes):
        (self.root / name).write_bytes(data)
        self.artifacts[name] = hashlib.sha256(data).hexdigest()

    def json(self, name: str, obj) -> None:
        self._record(name, (json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n").encode())

    def text(self, name: str, text: str) -> None:
        self._record(name, text.encode())

    def csv(self, name: str, df: pd.DataFrame) -> None:
        self._record(name, df.to_csv(index=False, float_format="%.9g").encode())

    def finish(self) -> None:
        path = self.root / "manifest.json"
        runs = json.loads(path.read_text())["runs"] if path.exists() else []
        try:
            pkg_version = version("artifact")
        except PackageNotFoundError:
            pkg_version = "unknown"
        entry = {"command": self.command, "config": str(self.cfg.source),
                 "config_sha256": self.cfg.digest, "seed": self.cfg.seed,
                 "artifacts": self.artifacts, "package_version": pkg_version}
        if entry not in runs:
            runs.append(entry)
        path.write_text(json.dumps({"runs": runs}, indent=2, sort_keys=True) + "\n")


# -- shared loaders --------------------------------------------------------------------

def _costbook(cfg: RunConfig) -> CostBook:
    if cfg.paths["costbook"] is not None:
        return load_costbook(cfg.paths["costbook"])
    return CostBook.year(cfg.cost_year)


def _fit(cfg: RunConfig):
    seed = cfg.require_seed("fit")
    _, values = load_consumption_csv(cfg.paths["consumption"])
    samples = growth_samples(values)
    dist = mcmc_fit(samples, cfg.mcmc)
    log.info("fitted %s (seed %d)", dist.params, seed)
    return samples, dist


def _matrix(cfg: RunConfig, source: str) -> TransitionMatrix:
    if source == "table2":
        return TransitionMatrix.default()
    if source == "mid_only":
        return TransitionMatrix(np.tile([0.0, 1.0, 0.0], (3, 1)), DEFAULT_GROWTH)
    return build_transition_matrix(_fit(cfg)[1])


# -- commands --------------------------------------------------------------------------

def cmd_fit(cfg: RunConfig, out: RunDir):
    samples, dist = _fit(cfg)
    out.json("fit.json", {
        "distribution": dist.kind, "params": dist.params,
        "diagnostics": {k: v for k, v in dist.info.items() if k != "chain"},
        "n_samples": len(samples), "bucket_masses": bucket_masses(dist),
        "representative_growth": build_transition_matrix(dist).growth,
    })


def cmd_matrix(cfg: RunConfig, out: RunDir):
    m = _matrix(cfg, cfg.matrix.source)
    out.json("transition_matrix.json", {"source": cfg.matrix.source, "states": m.states,
                                        "p": m.p, "growth_per_yr": m.growth})
    df = pd.DataFrame(m.p, columns=[f"to_{s}" for s in m.states])
    df.insert(0, "from", m.states)
    df["growth_per_yr"] = m.growth
    out.csv("transition_matrix.csv", df)


def cmd_optimize(cfg: RunConfig, out: RunDir):
    d = cfg.dispatch
    net = load_network(cfg.paths["network"])
    demand = load_demand_csv(cfg.paths["demand"]).scaled(d.demand_factor)
    book = _costbook(cfg)
    if d.representative_weeks:
        demand, horizon = representative_weeks(demand, d.representative_weeks)
    else:
        horizon = DispatchHorizon.full_year(demand.hours)
    opts = DispatchOptions(india_mode=d.india_mode, allow_storage=d.allow_storage,
                           allow_upgrades=d.allow_upgrades, allow_nonserved=d.allow_nonserved,
                           multi_site=d.multi_site, theta_max=d.theta_max, backend=d.backend)
    design = optimize_design(net, None, demand, book, opts, horizon)
    summary = design.summary()
    summary["aic_usd_per_yr"] = annualized_cost(design, book).to_dict()
    summary["demand_factor"] = d.demand_factor
    out.json("design.json", summary)
    out.csv("dispatch.csv", dispatch_report(design))


def cmd_value(cfg: RunConfig, out: RunDir):
    v = cfg.value
    rows = []
    for name, sc in v.scenarios.items():
        trad = float(sc["traditional"])
        stor = float(sc.get("storage", sc.get("nwa_path")))
        deferred = float(sc.get("deferred", sc.get("nwa_path", trad)))
        ov = option_cost(trad, stor, deferred, v.deferral, v.horizon, v.rate)
        rows.append({"scenario": name, "aic_traditional_usd_per_yr": trad,
                     "aic_storage_usd_per_yr": stor, "aic_deferred_usd_per_yr": deferred,
                     "option_value_usd_per_yr": ov.option_value, "nwa_feasible": ov.nwa_feasible})
    result = {"deferral_years": v.deferral, "horizon_years": v.horizon, "rate": v.rate,
              "scenarios": rows}
    if v.row is not None:
        costs = v.option_values if v.option_values is not None else [r["option_value_usd_per_yr"]
                                                                     for r in rows]
        result["expected_option_value_usd_per_yr"] = expected_option_value(v.row, costs)
    out.json("option_values.json", result)
    out.csv("option_values.csv", pd.DataFrame(rows))


def cmd_simulate(cfg: RunConfig, out: RunDir):
    seed = cfg.require_seed("simulate")
    s = cfg.simulate
    net = load_network(cfg.paths["network"])
    base = load_demand_csv(cfg.paths["demand"])
    matrix = _matrix(cfg, s.matrix)
    res = monte_carlo(net, base, matrix, _costbook(cfg), s.plan, s.n_trajectories, seed)
    lines = []
    for i, t in enumerate(res.trajectories):
        for r in t.records():
            r["trajectory"] = i
            r["termination"] = t.termination
            lines.append(json.dumps(_jsonable(r), sort_keys=True))
    out.text("trajectories.jsonl", "\n".join(lines) + "\n")
    out.json("simulation_summary.json", {**res.summary(), "seed": seed, "matrix": s.matrix})


def cmd_scale(cfg: RunConfig, out: RunDir):
    sc = cfg.scale
    net = load_network(cfg.paths["network"])
    base = load_demand_csv(cfg.paths["demand"])
    study = CityStudy.load(cfg.paths["city_study"])
    cs = ClassStudy.from_study(net, base, study)
    book = _costbook(cfg)
    res = cost_sensitivity(study, cs, book, {k: tuple(v) for k, v in sc.variants.items()})
    out.csv("city_aggregates.csv", sensitivity_table(res))
    summary = {"binding_dispatch": (dispatch_binding(res) if {"low", "mid"} <= set(res) else None)}
    if sc.breakeven:
        be = breakeven_storage_cost(
            lambda e, p: cs.max_option_value(study, book.with_storage_costs(e, p)),
            sc.breakeven_low, sc.breakeven_high)
        at_be = cs.run(study, book.with_storage_costs(be.energy_usd_per_kwh, be.power_usd_per_kw))
        summary["breakeven"] = {"energy_usd_per_kwh": be.energy_usd_per_kwh,
                                "power_usd_per_kw": be.power_usd_per_kw, "ray_position": be.t,
                                "option_value_usd_per_yr": be.option_value,
                                "storage_gwh_at_breakeven": sum(a.storage_gwh for a in at_be.values())}
    out.json("scale_summary.json", summary)


def cmd_report(cfg: RunConfig, out: RunDir):
    disp = out.root / "dispatch.csv"
    traj = out.root / "trajectories.jsonl"
    missing = [p.name for p in (disp, traj) if not p.exists()]
    if missing:
        raise ConfigError(f"report needs {missing} in {out.root}; run optimize and simulate first")
    d = pd.read_csv(disp)
    fig6 = d[["hour_of_year", "load_mw", "substation_mw", "charge_mw", "discharge_mw", "soc_mwh"]]
    out.csv("fig_dispatch.csv", fig6)
    recs = [json.loads(line) for line in traj.read_text().splitlines() if line.strip()]
    df = pd.DataFrame(recs)
    counts = df.pivot_table(index="year", columns="action", values="trajectory", aggfunc="count",
                            fill_value=0)
    for a in ("no_action", "storage_nwa", "traditional_upgrade"):
        if a not in counts:
            counts[a] = 0
    counts = counts[["no_action", "storage_nwa", "traditional_upgrade"]].add_suffix("_count")
    means = df.groupby("year").agg(mean_storage_energy_kwh=("storage_energy_kwh", "mean"),
                                   mean_upgraded_km=("upgraded_km", "mean"),
                                   mean_stage_cost_usd_per_yr=("stage_cost_usd_per_yr", "mean"))
    out.csv("fig_trajectory.csv", counts.join(means).reset_index())


HANDLERS = {"fit": cmd_fit, "matrix": cmd_matrix, "optimize": cmd_optimize, "value": cmd_value,
            "simulate": cmd_simulate, "scale": cmd_scale, "report": cmd_report}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, (DesignInfeasibleError, IterationLimitError, SolverFailureError)):
        return EXIT_SOLVER
    if isinstance(exc, (ConfigError, NetworkError, LPModelError, DispatchConfigError,
                        NoSignChangeError, FileNotFoundError, KeyError, ValueError)):
        return EXIT_VALIDATION
    return EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gridnwa", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    ap.add_argument("--out", default="runs/latest", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_root = Path(args.out)
    try:
        cfg = load_config(args.config, args.seed)
        out = RunDir(out_root, args.command, cfg)
        HANDLERS[args.command](cfg, out)
        out.finish()
    except Exception as exc:  # every failure becomes an error record and an exit code
        code = exit_code_for(exc)
        record = {"command": args.command, "error_type": type(exc).__name__,
                  "message": str(exc), "exit_code": code}
        if isinstance(exc, ConvergenceError):
            record["diagnostic"] = exc.diagnostic
        try:
            out_root.mkdir(parents=True, exist_ok=True)
            (out_root / "error.json").write_text(json.dumps(_jsonable(record), indent=2) + "\n")
        except OSError:
            pass
        print(json.dumps(_jsonable(record)), file=sys.stderr)
        if code == EXIT_SOLVER and not isinstance(exc, (DesignInfeasibleError, IterationLimitError)):
            log.exception("unexpected failure")
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
