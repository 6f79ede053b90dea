"""Run configuration: one JSON file per study, with command-line overrides."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .demand import DATA_DIR, MCMCConfig
from .mdp import PlanConfig


class ConfigError(ValueError):
    pass


BUNDLED = {
    "network": DATA_DIR / "sample_feeder.json",
    "demand": DATA_DIR / "demand_2020.csv",
    "consumption": DATA_DIR / "china_consumption.csv",
    "city_study": DATA_DIR / "city_study.json",
    "costbook": None,  # CostBook defaults (2030)
}

# reference AIC pairs for the single-network study: traditional vs storage-plus-deferral, USD/yr
TABLE5_SCENARIOS = {
    "low": {"traditional": 14673.0, "nwa_path": 12969.0},
    "mid": {"traditional": 22009.0, "nwa_path": 19453.0},
    "high": {"traditional": 29345.0, "nwa_path": 29937.0},
}


@dataclass(frozen=True)
class DispatchSection:
    india_mode: bool = True
    allow_storage: bool = True
    allow_upgrades: bool = False
    allow_nonserved: bool = False
    multi_site: bool = False
    demand_factor: float = round(1.0668 ** 10, 6)   # 2020 -> 2030 at mid growth
    representative_weeks: int | None = None        # None: full 8760 hours
    theta_max: float = 0.6
    backend: str = "auto"


@dataclass(frozen=True)
class ValueSection:
    deferral: int = 5
    horizon: int = 20
    rate: float = 0.09
    scenarios: dict = field(default_factory=lambda: dict(TABLE5_SCENARIOS))
    row: tuple | None = None        # optional transition row for the expected value
    option_values: tuple | None = None  # optional explicit O^{s'} for the expected value


@dataclass(frozen=True)
class MatrixSection:
    source: str = "table2"   # "table2" or "fit"


@dataclass(frozen=True)
class SimulateSection:
    n_trajectories: int = 1000
    matrix: str = "table2"   # "table2", "fit" or "mid_only"
    plan: PlanConfig = PlanConfig()


@dataclass(frozen=True)
class ScaleSection:
    variants: dict = field(default_factory=lambda: {"low": [116.0, 101.0], "mid": [168.0, 146.0],
                                                    "high": [236.0, 205.0]})
    breakeven_low: tuple = (116.0, 101.0)
    breakeven_high: tuple = (406.0, 353.0)
    breakeven: bool = True


@dataclass(frozen=True)
class RunConfig:
    source: Path | None
    raw: dict
    seed: int | None
    paths: dict
    cost_year: int
    dispatch: DispatchSection
    mcmc: MCMCConfig
    matrix: MatrixSection
    simulate: SimulateSection
    value: ValueSection
    scale: ScaleSection

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical JSON of the effective configuration."""
        blob = json.dumps({**self.raw, "seed": self.seed}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def require_seed(self, command: str) -> int:
        if self.seed is None:
            raise ConfigError(f"command {command!r} is stochastic and needs a seed "
                              "(config 'seed' or --seed)")
        return int(self.seed)


def _section(cls, data, name):
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name!r} section: {exc}") from exc


TOP_LEVEL = {"seed", "paths", "cost_year", "dispatch", "mcmc", "matrix", "simulate", "value",
             "scale", "description"}


def parse_config(data: dict, source: Path | None = None, seed: int | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(data) - TOP_LEVEL
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    base = source.parent if source else Path.cwd()
    paths = dict(BUNDLED)
    for key, val in (data.get("paths") or {}).items():
        if key not in BUNDLED:
            raise ConfigError(f"unknown path key {key!r}")
        p = Path(val)
        p = p if p.is_absolute() else base / p
        if not p.exists():
            raise ConfigError(f"paths.{key}: file not found: {p}")
        paths[key] = p
    sim = dict(data.get("simulate") or {})
    plan = _section(PlanConfig, sim.pop("plan", None), "simulate.plan")
    simulate = _section(SimulateSection, {**sim, "plan": plan}, "simulate")
    if simulate.matrix not in ("table2", "fit", "mid_only"):
        raise ConfigError(f"simulate.matrix must be table2, fit or mid_only")
    if simulate.n_trajectories < 1:
        raise ConfigError("simulate.n_trajectories must be >= 1")
    matrix = _section(MatrixSection, data.get("matrix"), "matrix")
    if matrix.source not in ("table2", "fit"):
        raise ConfigError("matrix.source must be table2 or fit")
    eff_seed = seed if seed is not None else data.get("seed")
    mcmc = _section(MCMCConfig, data.get("mcmc"), "mcmc")
    if eff_seed is not None:
        mcmc = MCMCConfig(**{**mcmc.__dict__, "seed": int(eff_seed)})
    cost_year = int(data.get("cost_year", 2030))
    if cost_year not in (2030, 2040):
        raise ConfigError("cost_year must be 2030 or 2040")
    raw = {k: v for k, v in data.items() if k != "description"}
    return RunConfig(source, raw, None if eff_seed is None else int(eff_seed), paths, cost_year,
                     _section(DispatchSection, data.get("dispatch"), "dispatch"), mcmc, matrix,
                     simulate, _section(ValueSection, data.get("value"), "value"),
                     _section(ScaleSection, data.get("scale"), "scale"))


def load_config(path, seed: int | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data, path.resolve(), seed)
