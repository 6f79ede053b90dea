"""Storage siting/sizing, line upgrades and hourly DC-flow dispatch as one LP.

Units inside the LP are MW, MWh and USD per year; reports convert storage to
kW/kWh.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
import pandas as pd

from .demand import Demand
from .lp import LPModel, Tolerances, certify, compile_standard_form, solve
from .lp.solvers import INFEASIBLE, UNBOUNDED
from .network import Network
from .valuation import CostBook, crf

log = logging.getLogger(__name__)

HOURS_PER_YEAR = 8760


class DispatchConfigError(ValueError):
    pass


class DesignInfeasibleError(RuntimeError):
    pass


class SolverFailureError(RuntimeError):
    pass


# -- resources ---------------------------------------------------------------------

@dataclass(frozen=True)
class StorageParams:
    """Battery resource. Costs are overnight; the model annualises them."""

    inv_energy: float        # C^e, USD/MWh
    inv_charge: float        # C^c, USD/MW of charge power
    fixed_energy: float = 0.0  # C^Fe, USD/MWh-yr
    fixed_charge: float = 0.0  # C^Fc, USD/MW-yr
    var_energy: float = 0.0    # C^Ve, USD/MWh discharged
    var_charge: float = 0.0    # C^Vc, USD/MWh charged
    degradation: float = 0.0   # C^d, capex premium on energy
    eta_charge: float = 0.92
    eta_discharge: float = 0.92
    depth_of_discharge: float = 0.9
    life_years: int = 15

    def __post_init__(self):
        for name in ("eta_charge", "eta_discharge", "depth_of_discharge"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise DispatchConfigError(f"{name} must lie in (0, 1]")
        for name in ("inv_energy", "inv_charge", "fixed_energy", "fixed_charge",
                     "var_energy", "var_charge", "degradation"):
            if getattr(self, name) < 0:
                raise DispatchConfigError(f"{name} must be >= 0")


@dataclass(frozen=True)
class ThermalParams:
    """Dispatchable supply with relaxed unit commitment (upstream grid in India mode)."""

    bus: int
    size_mw: float            # Omega^size (existing; not expanded)
    unit_mw: float            # Omega^unit
    var_cost: np.ndarray | float = 0.0  # C^V, USD/MWh, scalar or per timestep
    fuel_cost: float = 0.0    # C^Vf
    startup_cost: float = 0.0  # C^start, USD/MW started
    rho_min: float = 0.0
    rho_max: float = 1.0
    ramp_up: float = 1.0      # kappa^up, fraction of size per hour
    ramp_down: float = 1.0
    name: str = "upstream"

    def __post_init__(self):
        if not 0 <= self.rho_min <= self.rho_max <= 1:
            raise DispatchConfigError("need 0 <= rho_min <= rho_max <= 1")
        if not (self.size_mw > 0 and self.unit_mw > 0):
            raise DispatchConfigError("thermal size and unit must be positive")


@dataclass(frozen=True)
class VREParams:
    bus: int
    size_mw: float
    availability: np.ndarray  # A_t in [0, 1]
    var_cost: float = 0.0
    name: str = "vre"


@dataclass(frozen=True)
class ResourceSet:
    storage: StorageParams | None
    thermal: tuple = ()
    vre: tuple = ()


def storage_from_costbook(book: CostBook, **kw) -> StorageParams:
    return StorageParams(inv_energy=book.energy_usd_per_kwh * 1e3,
                         inv_charge=book.power_usd_per_kw * 1e3,
                         fixed_charge=book.om_usd_per_kw_yr * 1e3,
                         degradation=book.degradation_per_yr,
                         life_years=book.storage_life_years, **kw)


def upstream_supply(network: Network, demand: Demand, book: CostBook, hour_of_year,
                    ramp_headroom: float = 1.0) -> ThermalParams:
    """Aggregate upstream resource at the substation.

    Capacity exceeds the peak; minimum output and ramp limits follow the
    minimum demand and the largest hourly change in total demand.
    """
    total = demand.total
    size = max(2.0 * float(total.max()), network.rated_capacity_mw)
    steps = np.abs(np.diff(np.r_[total, total[:1]]))
    ramp = min(1.0, ramp_headroom * float(steps.max()) / size) if steps.size else 1.0
    return ThermalParams(bus=network.substation.id, size_mw=size, unit_mw=size,
                         var_cost=book.tariff(hour_of_year), rho_min=float(total.min()) / size,
                         ramp_up=max(ramp, 1e-6), ramp_down=max(ramp, 1e-6))


# -- horizon -------------------------------------------------------------------------

@dataclass(frozen=True)
class DispatchHorizon:
    weights: np.ndarray       # hours represented by each timestep
    period_length: int        # timesteps per wrap-around period
    hour_of_year: np.ndarray  # original hour index, for tariffs

    def __post_init__(self):
        w = np.asarray(self.weights, float)
        if np.any(w <= 0):
            raise DispatchConfigError("timestep weights must be positive")
        if w.size % self.period_length:
            raise DispatchConfigError("horizon length must be a multiple of the period length")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "hour_of_year", np.asarray(self.hour_of_year, int))

    @classmethod
    def full_year(cls, hours: int = HOURS_PER_YEAR) -> "DispatchHorizon":
        return cls(np.ones(hours), hours, np.arange(hours))

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def starts(self) -> np.ndarray:
        return np.arange(0, self.size, self.period_length)

    def prev(self) -> np.ndarray:
        """Index of t-1 with wrap-around to the end of each period."""
        t = np.arange(self.size)
        return np.where(t % self.period_length == 0, t + self.period_length - 1, t - 1)


def representative_weeks(demand: Demand, n_weeks: int = 4) -> tuple[Demand, DispatchHorizon]:
    """Pick ``n_weeks`` weeks spread over the ranking of weekly peaks (peak week first)."""
    n_full = demand.hours // 168
    if not 1 <= n_weeks <= n_full:
        raise DispatchConfigError(f"n_weeks must be in [1, {n_full}]")
    weekly_peak = demand.total[: n_full * 168].reshape(n_full, 168).max(axis=1)
    order = np.argsort(-weekly_peak, kind="stable")
    ranks = np.unique(np.round(np.linspace(0, n_full - 1, n_weeks)).astype(int))
    weeks = np.sort(order[ranks])
    hours = (weeks[:, None] * 168 + np.arange(168)).reshape(-1)
    w = np.full(hours.size, demand.hours / hours.size)
    return Demand(demand.bus_ids, demand.mw[hours]), DispatchHorizon(w, 168, hours)


# -- options / outputs ---------------------------------------------------------------

@dataclass(frozen=True)
class DispatchOptions:
    india_mode: bool = True
    allow_storage: bool = True
    allow_upgrades: bool = True
    allow_nonserved: bool = True
    storage_buses: tuple | None = None   # None: buses flagged storage_allowed (india) or all
    multi_site: bool = False             # india mode: relax the single feeder-node restriction
    existing_storage: Mapping = field(default_factory=dict)  # bus -> (power MW, energy MWh)
    theta_max: float = 0.6
    ramp_headroom: float = 1.0
    backend: str = "auto"

    def storage_sites(self, network: Network) -> list[int]:
        if self.storage_buses is not None:
            sites = [int(b) for b in self.storage_buses]
        elif self.india_mode:
            sites = [b.id for b in network.buses if b.storage_allowed]
            if not self.multi_site:
                sites = sites[:1]
        else:
            sites = [b.id for b in network.buses if b.kind != "substation"]
        sites += [int(b) for b in self.existing_storage if int(b) not in sites]
        return sites


@dataclass(frozen=True)
class StorageUnit:
    bus: int
    power_kw: float
    energy_kwh: float
    new_power_kw: float = 0.0
    new_energy_kwh: float = 0.0

    @property
    def duration_h(self) -> float:
        return self.energy_kwh / self.power_kw if self.power_kw > 0 else float("nan")


@dataclass
class SystemDesign:
    storage: list
    line_upgrades: dict          # line id -> added rated MW
    upgraded_km: float
    dispatch: dict               # hourly arrays, MW
    total_cost: float            # USD/yr, LP objective
    cost_breakdown: dict
    certification: object = None
    options: DispatchOptions | None = None

    @property
    def storage_power_kw(self) -> float:
        return float(sum(u.power_kw for u in self.storage))

    @property
    def storage_energy_kwh(self) -> float:
        return float(sum(u.energy_kwh for u in self.storage))

    @property
    def new_storage_energy_kwh(self) -> float:
        return float(sum(u.new_energy_kwh for u in self.storage))

    @property
    def nonserved_mwh(self) -> float:
        d = self.dispatch
        return float(np.sum(d["weight"] * d["nonserved_mw"].sum(axis=1)))

    @property
    def peak_import_mw(self) -> float:
        return float(self.dispatch["import_mw"].max())

    def summary(self) -> dict:
        return {
            "storage": [{"bus": u.bus, "power_kw": u.power_kw, "energy_kwh": u.energy_kwh,
                         "new_power_kw": u.new_power_kw, "new_energy_kwh": u.new_energy_kwh,
                         "duration_h": u.duration_h} for u in self.storage],
            "line_upgrades_mw": {str(k): v for k, v in self.line_upgrades.items()},
            "upgraded_km": self.upgraded_km,
            "nonserved_mwh": self.nonserved_mwh,
            "peak_import_mw": self.peak_import_mw,
            "total_cost_usd_per_yr": self.total_cost,
            "cost_breakdown_usd_per_yr": self.cost_breakdown,
            "certified": bool(getattr(self.certification, "passed", False)),
        }


class DispatchLP(LPModel):
    """LPModel plus the bookkeeping needed to read a design back out."""

    def __init__(self, name="dispatch"):
        super().__init__(name)
        self.meta: dict = {}


# -- model ---------------------------------------------------------------------------

def _upgrade_cost_per_mw(network: Network, book: CostBook) -> dict[int, float]:
    """Annualised USD per MW of added flow limit; reconductoring doubles a line."""
    f = crf(book.discount_rate, book.line_life_years)
    return {ln.id: book.line_usd_per_km * ln.length_km * f / network.line_limit_mw(ln)
            for ln in network.lines if ln.upgradable}


def build_dispatch_model(network: Network, resources: ResourceSet, demand: Demand,
                         costs: CostBook, options: DispatchOptions = DispatchOptions(),
                         horizon: DispatchHorizon | None = None) -> DispatchLP:
    horizon = horizon or DispatchHorizon.full_year(demand.hours)
    T = horizon.size
    if demand.hours != T:
        raise DispatchConfigError(f"demand has {demand.hours} hours, horizon {T}")
    bidx = network.bus_index()
    for b in demand.bus_ids:
        if b not in bidx:
            raise DispatchConfigError(f"demand for unknown bus {b}")
    sites = options.storage_sites(network) if (options.allow_storage or options.existing_storage) else []
    if (options.allow_storage and not sites and not options.allow_upgrades):
        raise DispatchConfigError("storage allowed nowhere while upgrades are disabled")
    if options.allow_storage and resources.storage is None:
        raise DispatchConfigError("storage allowed but no storage resource given")

    nb, nl = len(network.buses), len(network.lines)
    w = horizon.weights
    prev = horizon.prev()
    m = DispatchLP()
    L = np.zeros((T, nb))
    for k, b in enumerate(demand.bus_ids):
        L[:, bidx[b]] = demand.mw[:, k]

    # voltage angles, reference at the substation
    th_lb = np.full((T, nb), -options.theta_max)
    th_ub = np.full((T, nb), options.theta_max)
    ref = bidx[network.substation.id]
    th_lb[:, ref] = th_ub[:, ref] = 0.0
    theta = m.add_variables("theta", (T, nb), th_lb, th_ub)

    limit = np.array([network.line_limit_mw(ln) for ln in network.lines])
    upg_cost = _upgrade_cost_per_mw(network, costs) if options.allow_upgrades else {}
    upg_lines = [k for k, ln in enumerate(network.lines) if ln.id in upg_cost]
    fl_lb = np.tile(-limit, (T, 1))
    fl_ub = np.tile(limit, (T, 1))
    for k in upg_lines:
        fl_lb[:, k], fl_ub[:, k] = -np.inf, np.inf
    flow = m.add_variables("flow", (T, nl), fl_lb, fl_ub)

    dem_terms = []
    B = np.array([ln.susceptance for ln in network.lines])
    frm = np.array([bidx[ln.from_bus] for ln in network.lines])
    to = np.array([bidx[ln.to_bus] for ln in network.lines])
    for k in range(nl):
        coef = np.zeros((T, nb))
        coef[:, to[k]] += 1.0
        coef[:, frm[k]] -= 1.0
        dem_terms.append((coef, np.repeat(flow[:, k:k + 1], nb, axis=1)))

    # DC flow: flow = B (theta_from - theta_to)
    m.add_constraints("net1", [(1.0, flow), (-B, theta[:, frm]), (B, theta[:, to])], "==", 0.0)

    if upg_lines:
        dphi = m.add_variables("dphi", len(upg_lines))
        m.add_objective(dphi, [upg_cost[network.lines[k].id] for k in upg_lines])
        f_u = flow[:, upg_lines]
        d_u = np.tile(dphi, (T, 1))
        m.add_constraints("net2", [(1.0, f_u), (-1.0, d_u)], "<=", limit[upg_lines])
        m.add_constraints("net3", [(1.0, f_u), (1.0, d_u)], ">=", -limit[upg_lines])
        m.meta["upg_lines"] = upg_lines

    # thermal / upstream supply with relaxed commitment
    thermal = list(resources.thermal)
    if thermal:
        ng = len(thermal)
        size = np.array([g.size_mw for g in thermal])
        unit = np.array([g.unit_mw for g in thermal])
        nmax = size / unit
        pi = m.add_variables("pi", (T, ng))
        v = m.add_variables("commit", (T, ng), 0.0, np.tile(nmax, (T, 1)))
        u = m.add_variables("startup", (T, ng), 0.0, np.tile(nmax, (T, 1)))
        n = m.add_variables("shutdown", (T, ng), 0.0, np.tile(nmax, (T, 1)))
        for j, g in enumerate(thermal):
            vc = np.broadcast_to(np.asarray(g.var_cost, float), (T,))
            m.add_objective(pi[:, j], w * (vc + g.fuel_cost))
            if g.startup_cost:
                m.add_objective(u[:, j], w * g.startup_cost * g.unit_mw)
            coef = np.zeros((T, nb))
            coef[:, bidx[g.bus]] = 1.0
            dem_terms.append((coef, np.repeat(pi[:, j:j + 1], nb, axis=1)))
        rho_min = np.array([g.rho_min for g in thermal])
        rho_max = np.array([g.rho_max for g in thermal])
        m.add_constraints("therm1_1", [(1.0, v), (-1.0, v[prev]), (-1.0, u), (1.0, n)], "==", 0.0)
        m.add_constraints("therm2", [(1.0, pi), (-rho_min * unit, v)], ">=", 0.0)
        m.add_constraints("therm3", [(1.0, pi), (-rho_max * unit, v)], "<=", 0.0)
        m.add_constraints("therm4", [(1.0, pi), (-1.0, pi[prev])], "<=",
                          size * np.array([g.ramp_up for g in thermal]))
        m.add_constraints("therm5", [(1.0, pi[prev]), (-1.0, pi)], "<=",
                          size * np.array([g.ramp_down for g in thermal]))
        m.meta["thermal_buses"] = [g.bus for g in thermal]

    for j, r in enumerate(resources.vre):
        avail = np.broadcast_to(np.asarray(r.availability, float), (T,))
        pv = m.add_variables(f"vre_{j}", T, 0.0, r.size_mw * avail)
        m.add_objective(pv, w * r.var_cost)
        coef = np.zeros((T, nb))
        coef[:, bidx[r.bus]] = 1.0
        dem_terms.append((coef, np.repeat(pv[:, None], nb, axis=1)))

    if options.allow_nonserved:
        load_cols = sorted({bidx[b] for b in demand.bus_ids})
        chi = m.add_variables("chi", (T, len(load_cols)), 0.0, L[:, load_cols])
        m.add_objective(chi, np.repeat(w[:, None], len(load_cols), axis=1) * costs.voll_usd_per_mwh)
        for k, col in enumerate(load_cols):
            coef = np.zeros((T, nb))
            coef[:, col] = 1.0
            dem_terms.append((coef, np.repeat(chi[:, k:k + 1], nb, axis=1)))
        m.meta["chi_cols"] = load_cols

    if sites:
        st = resources.storage or StorageParams(0.0, 0.0)
        ns = len(sites)
        ex_p = np.array([options.existing_storage.get(b, (0.0, 0.0))[0] for b in sites], float)
        ex_e = np.array([options.existing_storage.get(b, (0.0, 0.0))[1] for b in sites], float)
        ch = m.add_variables("charge", (T, ns))
        dis = m.add_variables("discharge", (T, ns))
        soc = m.add_variables("soc", (T, ns))
        if options.allow_storage:
            f = crf(costs.discount_rate, st.life_years)
            E = m.add_variables("energy_cap", ns)
            P = m.add_variables("power_cap", ns)
            m.add_objective(E, (st.inv_energy * f + st.fixed_energy) * (1.0 + st.degradation))
            m.add_objective(P, st.inv_charge * f + st.fixed_charge)
            Et, Pt = np.tile(E, (T, 1)), np.tile(P, (T, 1))
            cap_e = [(-st.depth_of_discharge, Et)]
            cap_p = [(-1.0, Pt)]
        else:
            cap_e, cap_p = [], []
        m.add_objective(ch, np.repeat(w[:, None], ns, axis=1) * st.var_charge)
        m.add_objective(dis, np.repeat(w[:, None], ns, axis=1) * st.var_energy)
        m.add_constraints("stor1", [(1.0, soc), (-1.0, soc[prev]), (1.0 / st.eta_discharge, dis),
                                    (-st.eta_charge, ch)], "==", 0.0)
        m.add_constraints("stor5", [(1.0, soc)] + cap_e, "<=", st.depth_of_discharge * ex_e)
        m.add_constraints("stor3", [(1.0, ch)] + cap_p, "<=", ex_p)
        m.add_constraints("stor31", [(1.0, ch), (1.0, dis)] + cap_p, "<=", ex_p)
        m.add_constraints("stor4", [(1.0, dis), (-1.0, soc[prev])], "<=", 0.0)
        for k, b in enumerate(sites):
            coef = np.zeros((T, nb))
            coef[:, bidx[b]] = 1.0
            dem_terms.append((coef, np.repeat(dis[:, k:k + 1], nb, axis=1)))
            dem_terms.append((-coef, np.repeat(ch[:, k:k + 1], nb, axis=1)))
        m.meta.update(sites=sites, existing_power=ex_p, existing_energy=ex_e, storage=st)

    m.add_constraints("dem", dem_terms, "==", L)

    if options.india_mode:
        sub = network.substation.id
        touching = [(1.0 if ln.from_bus == sub else -1.0, k)
                    for k, ln in enumerate(network.lines) if sub in (ln.from_bus, ln.to_bus)]
        m.add_constraints("nofeed", [(sgn, flow[:, k]) for sgn, k in touching], ">=", 0.0)
    m.meta.update(network=network, demand=demand, horizon=horizon, options=options, costs=costs,
                  load=L, thermal=thermal, upg_cost=upg_cost)
    return m


def default_resources(network: Network, demand: Demand, book: CostBook,
                      horizon: DispatchHorizon | None = None, ramp_headroom: float = 1.0) -> ResourceSet:
    horizon = horizon or DispatchHorizon.full_year(demand.hours)
    return ResourceSet(storage=storage_from_costbook(book),
                       thermal=(upstream_supply(network, demand, book, horizon.hour_of_year,
                                                ramp_headroom),))


def solve_dispatch(model: DispatchLP, tol: Tolerances | None = None):
    lp = compile_standard_form(model)
    sol = solve(lp, tol, model.meta["options"].backend)
    return lp, sol


def extract_design(model: DispatchLP, lp, sol) -> SystemDesign:
    meta = model.meta
    net: Network = meta["network"]
    hz: DispatchHorizon = meta["horizon"]
    x = sol.x
    get = lambda name: model.values(x, name)  # noqa: E731
    w = hz.weights
    disp = {"weight": w, "hour_of_year": hz.hour_of_year, "load_mw": meta["load"],
            "theta_rad": get("theta"), "flow_mw": get("flow")}
    ref_lines = [k for k, ln in enumerate(net.lines) if net.substation.id in (ln.from_bus, ln.to_bus)]
    imp = np.zeros(hz.size)
    for k in ref_lines:
        sign = 1.0 if net.lines[k].from_bus == net.substation.id else -1.0
        imp += sign * disp["flow_mw"][:, k]
    if "pi" in model.var_blocks:
        disp["supply_mw"] = get("pi")
        sub_cols = [j for j, b in enumerate(meta["thermal_buses"]) if b == net.substation.id]
        if sub_cols and not ref_lines:
            imp = disp["supply_mw"][:, sub_cols].sum(axis=1)
    disp["import_mw"] = imp
    disp["nonserved_mw"] = get("chi") if "chi" in model.var_blocks else np.zeros((hz.size, 1))

    storage = []
    breakdown = {"storage_energy": 0.0, "storage_power": 0.0, "storage_variable": 0.0,
                 "supply_variable": 0.0, "startup": 0.0, "nonserved": 0.0, "line_upgrade": 0.0}
    c = model.c
    if "charge" in model.var_blocks:
        disp["charge_mw"] = get("charge")
        disp["discharge_mw"] = get("discharge")
        disp["soc_mwh"] = get("soc")
        ex_p, ex_e = meta["existing_power"], meta["existing_energy"]
        new_p = get("power_cap") if "power_cap" in model.var_blocks else np.zeros(len(meta["sites"]))
        new_e = get("energy_cap") if "energy_cap" in model.var_blocks else np.zeros(len(meta["sites"]))
        for k, b in enumerate(meta["sites"]):
            p_tot, e_tot = ex_p[k] + new_p[k], ex_e[k] + new_e[k]
            if p_tot > 1e-9 or e_tot > 1e-9:
                storage.append(StorageUnit(int(b), float(p_tot * 1e3), float(e_tot * 1e3),
                                           float(new_p[k] * 1e3), float(new_e[k] * 1e3)))
        for name, key in (("energy_cap", "storage_energy"), ("power_cap", "storage_power"),
                          ("charge", "storage_variable"), ("discharge", "storage_variable")):
            if name in model.var_blocks:
                blk = model.var_blocks[name]
                sl = slice(blk.start, blk.start + blk.size)
                breakdown[key] += float(c[sl] @ x[sl])
    for name, key in (("pi", "supply_variable"), ("startup", "startup"), ("chi", "nonserved"),
                      ("dphi", "line_upgrade")):
        if name in model.var_blocks:
            blk = model.var_blocks[name]
            sl = slice(blk.start, blk.start + blk.size)
            breakdown[key] += float(c[sl] @ x[sl])
    for name in model.var_blocks:
        if name.startswith("vre_"):
            blk = model.var_blocks[name]
            sl = slice(blk.start, blk.start + blk.size)
            breakdown["supply_variable"] += float(c[sl] @ x[sl])

    upgrades = {}
    km = 0.0
    if "dphi" in model.var_blocks:
        dphi = get("dphi")
        for k, val in zip(meta["upg_lines"], dphi):
            if val > 1e-7:
                ln = net.lines[k]
                upgrades[ln.id] = float(val / net.loading_limit_fraction)
                km += ln.length_km
    return SystemDesign(storage=storage, line_upgrades=upgrades, upgraded_km=float(km),
                        dispatch=disp, total_cost=float(sol.objective), cost_breakdown=breakdown,
                        certification=certify(lp, sol), options=meta["options"])


def optimize_design(network: Network, resources: ResourceSet | None, demand: Demand,
                    costs: CostBook, options: DispatchOptions = DispatchOptions(),
                    horizon: DispatchHorizon | None = None,
                    tol: Tolerances | None = None) -> SystemDesign:
    """Build, solve, certify and read back the least-cost design."""
    if resources is None:
        resources = default_resources(network, demand, costs, horizon, options.ramp_headroom)
    model = build_dispatch_model(network, resources, demand, costs, options, horizon)
    lp, sol = solve_dispatch(model, tol)
    if sol.status == INFEASIBLE:
        raise DesignInfeasibleError(_infeasibility_cause(network, demand, options))
    if sol.status == UNBOUNDED:
        raise DispatchConfigError("dispatch LP is unbounded; check cost signs and bounds")
    if not sol.optimal:
        raise SolverFailureError(f"dispatch LP ended with status {sol.status!r}")
    design = extract_design(model, lp, sol)
    if not design.certification.passed:
        log.warning("dispatch solution failed certification: %s", design.certification)
    return design


def _infeasibility_cause(network: Network, demand: Demand, options: DispatchOptions) -> str:
    peak = demand.peak_mw
    lim = network.loading_limit_mw
    parts = [f"dispatch LP infeasible (peak demand {peak:.3f} MW, loading limit {lim:.3f} MW"]
    if not options.allow_nonserved:
        parts.append("non-served energy disabled")
    if not options.allow_upgrades:
        parts.append("line upgrades disabled")
    if not options.allow_storage:
        parts.append("storage disabled")
    return ", ".join(parts) + ")"


def dispatch_report(design: SystemDesign) -> pd.DataFrame:
    """Hourly table of substation import and storage operation (plot-ready)."""
    d = design.dispatch
    T = d["import_mw"].size
    zeros = np.zeros(T)
    ch = d["charge_mw"].sum(axis=1) if "charge_mw" in d else zeros
    dis = d["discharge_mw"].sum(axis=1) if "discharge_mw" in d else zeros
    soc = d["soc_mwh"].sum(axis=1) if "soc_mwh" in d else zeros
    return pd.DataFrame({
        "hour_of_year": d["hour_of_year"],
        "weight_h": d["weight"],
        "load_mw": d["load_mw"].sum(axis=1),
        "substation_mw": d["import_mw"],
        "charge_mw": ch,
        "discharge_mw": dis,
        "soc_mwh": soc,
        "nonserved_mw": d["nonserved_mw"].sum(axis=1),
    })


def with_storage_cost(costs: CostBook, energy_usd_per_kwh: float, power_usd_per_kw: float) -> CostBook:
    return replace(costs, energy_usd_per_kwh=energy_usd_per_kwh, power_usd_per_kw=power_usd_per_kw)
