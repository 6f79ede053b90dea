"""Scale representative-feeder results to city totals.

Each feeder class stands for every feeder with a similar peak loading. A
class is studied once on a representative profile; its storage and line
results are multiplied by the ratio of the demand the class serves in a city
to the demand of the representative feeder.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .demand import Demand
from .dispatch import (DesignInfeasibleError, DispatchHorizon, DispatchOptions, SystemDesign,
                       optimize_design, representative_weeks)
from .network import Network, overloaded_lines, radial_flows
from .valuation import CostBook, annualized_cost, line_aic, option_cost

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeederClass:
    id: int
    loading_fraction: float
    represented_demand_mwh: float   # annual energy of the representative feeder
    serviced_demand_mwh: float      # annual energy of all feeders of the class in the city
    serviced_km: float

    def __post_init__(self):
        if not 0 < self.loading_fraction <= 1:
            raise ValueError("loading_fraction must lie in (0, 1]")
        if not 0 < self.represented_demand_mwh <= self.serviced_demand_mwh:
            raise ValueError("need serviced_demand >= represented_demand > 0")
        if self.serviced_km <= 0:
            raise ValueError("serviced_km must be positive")

    @property
    def ratio(self) -> float:
        return self.serviced_demand_mwh / self.represented_demand_mwh


@dataclass(frozen=True)
class ClassResult:
    """Representative-feeder outcome for one class (unscaled)."""

    class_id: int
    decision: str                  # no_action | storage_nwa | traditional_upgrade
    storage_kw: float = 0.0
    storage_kwh: float = 0.0
    aic_storage: float = 0.0       # USD/yr
    aic_upgrade: float = 0.0       # USD/yr
    upgraded_km: float = 0.0
    option_value: float | None = None


@dataclass(frozen=True)
class ScaledResult:
    class_id: int
    decision: str
    ratio: float
    storage_mwh: float
    storage_mw: float
    deferred_km: float
    aic_storage: float
    aic_upgrade: float


@dataclass(frozen=True)
class CityAggregate:
    city: str
    storage_gwh: float
    storage_gw: float
    deferred_km: float
    serviced_km: float
    flexible_budget_usd: float
    traditional_budget_usd: float
    classes: tuple = ()

    @property
    def savings(self) -> float:
        if self.traditional_budget_usd == 0:
            return 0.0
        return 1.0 - self.flexible_budget_usd / self.traditional_budget_usd

    @property
    def nwa_worse(self) -> bool:
        return self.savings < 0

    def to_dict(self) -> dict:
        return {"city": self.city, "storage_gwh": self.storage_gwh, "storage_gw": self.storage_gw,
                "deferred_km": self.deferred_km, "serviced_km": self.serviced_km,
                "flexible_budget_usd": self.flexible_budget_usd,
                "traditional_budget_usd": self.traditional_budget_usd,
                "savings_fraction": self.savings}


def scale_feeder(result: ClassResult, fc: FeederClass) -> ScaledResult:
    r = fc.ratio
    if r <= 0:
        raise ValueError("scale ratio must be positive")
    nwa = result.decision == "storage_nwa"
    return ScaledResult(fc.id, result.decision, r,
                        storage_mwh=result.storage_kwh * 1e-3 * r if nwa else 0.0,
                        storage_mw=result.storage_kw * 1e-3 * r if nwa else 0.0,
                        deferred_km=fc.serviced_km if nwa else 0.0,
                        aic_storage=result.aic_storage * r if nwa else 0.0,
                        aic_upgrade=result.aic_upgrade * r)


def aggregate_city(city: str, classes, results, horizon: int = 30, deferral: int = 10) -> CityAggregate:
    """Fold scaled class results into city totals and 30-year budgets.

    Storage classes pay storage AIC during the deferral and the upgrade AIC
    for the remaining years; every other overloaded class pays the upgrade
    AIC over the whole horizon, which is also the traditional budget.
    """
    if not 0 < deferral <= horizon:
        raise ValueError("need 0 < deferral <= horizon")
    by_id = {r.class_id: r for r in results}
    if {fc.id for fc in classes} - set(by_id):
        raise ValueError("every class needs a resolved decision")
    scaled = [scale_feeder(by_id[fc.id], fc) for fc in classes]
    flexible = traditional = 0.0
    for s in scaled:
        traditional += s.aic_upgrade * horizon
        if s.decision == "storage_nwa":
            flexible += s.aic_storage * deferral + s.aic_upgrade * (horizon - deferral)
        else:
            flexible += s.aic_upgrade * horizon
    return CityAggregate(
        city=city,
        storage_gwh=sum(s.storage_mwh for s in scaled) * 1e-3,
        storage_gw=sum(s.storage_mw for s in scaled) * 1e-3,
        deferred_km=sum(s.deferred_km for s in scaled),
        serviced_km=sum(fc.serviced_km for fc in classes),
        flexible_budget_usd=flexible, traditional_budget_usd=traditional,
        classes=tuple(scaled))


# -- class studies on the representative feeder ----------------------------------------

@dataclass
class CityStudy:
    """Synthetic study: class table plus per-city serviced demand."""

    classes: list          # dicts with id, loading_fraction, share_of_demand, km_per_gwh
    cities: list           # dicts with name, demand_twh
    note: str = ""
    settings: dict = field(default_factory=dict)  # ClassStudy keyword defaults

    @classmethod
    def load(cls, path) -> "CityStudy":
        data = json.loads(Path(path).read_text())
        shares = sum(c["share_of_demand"] for c in data["classes"])
        if abs(shares - 1.0) > 1e-9:
            raise ValueError(f"class demand shares sum to {shares}, not 1")
        return cls(data["classes"], data["cities"], data.get("note", ""), data.get("study", {}))

    def feeder_classes(self, city: dict, represented_mwh: dict) -> list[FeederClass]:
        out = []
        for c in self.classes:
            serviced = city["demand_twh"] * 1e6 * c["share_of_demand"]
            out.append(FeederClass(c["id"], c["loading_fraction"], represented_mwh[c["id"]],
                                   serviced, c["km_per_gwh"] * serviced * 1e-3))
        return out


@dataclass
class ClassStudy:
    """Runs the storage-or-upgrade choice for each class on one network/profile.

    The representative profile of a class is the base profile rescaled so its
    peak loads the network to ``loading_fraction`` of rated capacity, then
    grown by ``growth_factor`` to the study year. Classes overloaded in the
    study year compare a storage-only design against an upgrade-only design,
    both sized for the demand at the end of the deferral window
    (``window_factor`` more growth). ``upgrade_costing`` selects whole-line
    reconductoring of every upgraded line ("km") or the LP's per-MW upgrade
    cost ("per_mw"), which averages lumpy upgrades over many feeders.
    """

    network: Network
    base: Demand
    growth_factor: float = 1.0
    window_factor: float = 1.0
    deferral: int = 10
    horizon: int = 30
    upgrade_costing: str = "km"
    n_weeks: int | None = 4
    _upgrade_cache: dict = field(default_factory=dict, repr=False)
    _storage_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.upgrade_costing not in ("km", "per_mw"):
            raise ValueError(f"unknown upgrade_costing {self.upgrade_costing!r}")
        if not 0 < self.deferral <= self.horizon:
            raise ValueError("need 0 < deferral <= horizon")

    def profile(self, loading_fraction: float, window: bool = False) -> Demand:
        f = loading_fraction * self.network.rated_capacity_mw / self.base.peak_mw
        return self.base.scaled(f * self.growth_factor * (self.window_factor if window else 1.0))

    def represented_mwh(self, loading_fraction: float) -> float:
        return float(self.profile(loading_fraction).total.sum())

    def _frame(self, demand: Demand):
        if self.n_weeks:
            return representative_weeks(demand, self.n_weeks)
        return demand, DispatchHorizon.full_year(demand.hours)

    def overloaded(self, loading_fraction: float) -> bool:
        d = self.profile(loading_fraction)
        flows = radial_flows(self.network, {b: -d.bus(b) for b in d.bus_ids})
        return bool(overloaded_lines(self.network, flows))

    def upgrade(self, loading_fraction: float, book: CostBook) -> SystemDesign:
        key = (loading_fraction, book.line_usd_per_km, book.discount_rate)
        if key not in self._upgrade_cache:
            d, hz = self._frame(self.profile(loading_fraction, window=True))
            self._upgrade_cache[key] = optimize_design(
                self.network, None, d, book,
                DispatchOptions(allow_storage=False, allow_nonserved=False), hz)
        return self._upgrade_cache[key]

    def upgrade_aic(self, design: SystemDesign, book: CostBook) -> float:
        if self.upgrade_costing == "km":
            return line_aic(design.upgraded_km, book)
        return design.cost_breakdown["line_upgrade"]

    def storage(self, loading_fraction: float, book: CostBook) -> SystemDesign | None:
        key = (loading_fraction, book.energy_usd_per_kwh, book.power_usd_per_kw)
        if key not in self._storage_cache:
            d, hz = self._frame(self.profile(loading_fraction, window=True))
            try:
                self._storage_cache[key] = optimize_design(
                    self.network, None, d, book,
                    DispatchOptions(allow_upgrades=False, allow_nonserved=False), hz)
            except DesignInfeasibleError:
                self._storage_cache[key] = None
        return self._storage_cache[key]

    def resolve(self, class_id: int, loading_fraction: float, book: CostBook) -> ClassResult:
        if not self.overloaded(loading_fraction):
            return ClassResult(class_id, "no_action")
        up = self.upgrade(loading_fraction, book)
        a_up = self.upgrade_aic(up, book)
        st = self.storage(loading_fraction, book)
        if st is None:
            return ClassResult(class_id, "traditional_upgrade", aic_upgrade=a_up,
                               upgraded_km=up.upgraded_km)
        a_st = annualized_cost(st, book).storage
        ov = option_cost(a_up, a_st, a_up, self.deferral, self.horizon, book.discount_rate).option_value
        if ov > 0:
            return ClassResult(class_id, "storage_nwa", st.storage_power_kw, st.storage_energy_kwh,
                               a_st, a_up, up.upgraded_km, ov)
        return ClassResult(class_id, "traditional_upgrade", aic_upgrade=a_up,
                           upgraded_km=up.upgraded_km, option_value=ov)

    def resolve_all(self, study: "CityStudy", book: CostBook) -> list[ClassResult]:
        return [self.resolve(c["id"], c["loading_fraction"], book) for c in study.classes]

    def run(self, study: "CityStudy", book: CostBook) -> dict[str, CityAggregate]:
        results = self.resolve_all(study, book)
        rep = {c["id"]: self.represented_mwh(c["loading_fraction"]) for c in study.classes}
        return {city["name"]: aggregate_city(city["name"], study.feeder_classes(city, rep), results,
                                             self.horizon, self.deferral)
                for city in study.cities}

    def max_option_value(self, study: "CityStudy", book: CostBook) -> float:
        """Largest class option value; storage is deployed somewhere iff it is positive."""
        vals = [r.option_value for r in self.resolve_all(study, book) if r.option_value is not None]
        return float(max(vals, default=-np.inf))

    @classmethod
    def from_study(cls, network: Network, base: Demand, study: "CityStudy", **overrides):
        kw = {**study.settings, **overrides}
        return cls(network, base, **kw)


COST_VARIANTS = {"low": (116.0, 101.0), "mid": (168.0, 146.0), "high": (236.0, 205.0)}


def cost_sensitivity(study: CityStudy, class_study: ClassStudy, book: CostBook,
                     variants: dict = COST_VARIANTS) -> dict[str, dict[str, CityAggregate]]:
    """City aggregates under each (USD/kWh, USD/kW) storage cost variant."""
    return {name: class_study.run(study, book.with_storage_costs(e, p))
            for name, (e, p) in variants.items()}


def dispatch_binding(results: dict, a: str = "low", b: str = "mid", rtol: float = 1e-6) -> bool:
    """True when two cost variants deploy the same storage everywhere.

    Cheaper storage then buys no extra deployment: the dispatch need, not the
    price, sets the size.
    """
    return all(np.isclose(results[a][c].storage_gwh, results[b][c].storage_gwh, rtol=rtol)
               for c in results[a])


def sensitivity_table(results: dict) -> pd.DataFrame:
    rows = []
    for variant, cities in results.items():
        for city, agg in cities.items():
            rows.append({"variant": variant, "city": city, "storage_gwh": agg.storage_gwh,
                         "storage_gw": agg.storage_gw, "deferred_km": agg.deferred_km,
                         "flexible_budget_usd": agg.flexible_budget_usd,
                         "traditional_budget_usd": agg.traditional_budget_usd,
                         "savings_fraction": agg.savings})
    return pd.DataFrame(rows)


# -- representative-feeder classification ------------------------------------------

def kmedoids(features: np.ndarray, k: int, seed: int = 0, max_iter: int = 100):
    """Alternating k-medoids on Euclidean distance; returns ``(medoids, labels)``."""
    X = np.asarray(features, float)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    rng = np.random.default_rng(seed)
    med = np.sort(rng.choice(n, k, replace=False))
    for _ in range(max_iter):
        labels = D[:, med].argmin(axis=1)
        new = med.copy()
        for j in range(k):
            members = np.flatnonzero(labels == j)
            if members.size:
                new[j] = members[D[np.ix_(members, members)].sum(axis=1).argmin()]
        new = np.sort(new)
        if np.array_equal(new, med):
            break
        med = new
    return med, D[:, med].argmin(axis=1)


def feeder_features(peak_loading: np.ndarray, profiles: np.ndarray) -> np.ndarray:
    """Loading fraction plus the peak-normalised daily-average shape (24 values)."""
    P = np.asarray(profiles, float)
    days = P.shape[1] // 24
    daily = P[:, : days * 24].reshape(P.shape[0], days, 24).mean(axis=1)
    shape = daily / daily.max(axis=1, keepdims=True)
    return np.column_stack([np.asarray(peak_loading, float), shape])
