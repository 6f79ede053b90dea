"""Annualised costs, NWA option value, breakeven storage cost and CUR."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Callable

import numpy as np

if TYPE_CHECKING:
    from .dispatch import SystemDesign

# option_value = traditional path - storage/deferred path; > 0 means the NWA wins
NWA_FEASIBLE_SIGN = 1.0


@dataclass(frozen=True)
class CostBook:
    """Cost inputs in the units utilities quote them in (USD, kW, kWh, km)."""

    energy_usd_per_kwh: float = 168.0
    power_usd_per_kw: float = 146.0
    om_usd_per_kw_yr: float = 20.0
    new_line_usd_per_km: float = 350_000.0
    reconductoring_usd_per_km: float = 650_000.0
    offpeak_tariff_usd_per_mwh: float = 55.0
    peak_tariff_usd_per_mwh: float = 90.0
    peak_hours: tuple = (20, 21, 22, 23)
    discount_rate: float = 0.09
    line_life_years: int = 30
    storage_life_years: int = 15
    degradation_per_yr: float = 0.0146
    voll_usd_per_mwh: float = 10_000.0
    upgrade_basis: str = "reconductoring"  # or "new_line"

    def __post_init__(self):
        positive = ["energy_usd_per_kwh", "power_usd_per_kw", "om_usd_per_kw_yr",
                    "new_line_usd_per_km", "reconductoring_usd_per_km",
                    "offpeak_tariff_usd_per_mwh", "peak_tariff_usd_per_mwh",
                    "line_life_years", "storage_life_years", "voll_usd_per_mwh"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"CostBook.{name} must be positive")
        if not 0 < self.discount_rate < 1:
            raise ValueError("discount_rate must lie in (0, 1)")
        if self.degradation_per_yr < 0:
            raise ValueError("degradation_per_yr must be >= 0")
        if self.upgrade_basis not in ("reconductoring", "new_line"):
            raise ValueError(f"unknown upgrade_basis {self.upgrade_basis!r}")
        object.__setattr__(self, "peak_hours", tuple(int(h) for h in self.peak_hours))

    @classmethod
    def year(cls, year: int) -> "CostBook":
        if year == 2030:
            return cls()
        if year == 2040:
            return cls(energy_usd_per_kwh=147.0, power_usd_per_kw=128.0, om_usd_per_kw_yr=18.0)
        raise ValueError(f"no default cost book for {year}")

    @property
    def line_usd_per_km(self) -> float:
        return (self.reconductoring_usd_per_km if self.upgrade_basis == "reconductoring"
                else self.new_line_usd_per_km)

    def with_storage_costs(self, energy_usd_per_kwh: float, power_usd_per_kw: float) -> "CostBook":
        return replace(self, energy_usd_per_kwh=float(energy_usd_per_kwh),
                       power_usd_per_kw=float(power_usd_per_kw))

    def tariff(self, hour_of_year) -> np.ndarray:
        """USD/MWh for each hour index (peak tariff inside ``peak_hours``)."""
        hod = np.asarray(hour_of_year) % 24
        return np.where(np.isin(hod, self.peak_hours), self.peak_tariff_usd_per_mwh,
                        self.offpeak_tariff_usd_per_mwh)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["peak_hours"] = list(self.peak_hours)
        return d


def load_costbook(path) -> CostBook:
    data = json.loads(Path(path).read_text())
    base = CostBook.year(int(data.pop("year"))) if "year" in data else CostBook()
    return replace(base, **data)


def crf(rate: float, life: float) -> float:
    """Capital recovery factor r / (1 - (1 + r)^-n)."""
    if life < 1:
        raise ValueError("life must be >= 1 year")
    if rate < 0:
        raise ValueError("rate must be >= 0")
    if rate == 0:
        return 1.0 / life
    # -expm1(-n log1p r) == 1 - (1+r)^-n without cancellation for tiny rates
    return rate / -np.expm1(-life * np.log1p(rate))


def annuity_factor(rate: float, start: float, end: float) -> float:
    """Present value at year 0 of 1 USD/yr paid at the end of years start+1..end."""
    years = np.arange(int(start) + 1, int(end) + 1)
    return float(np.sum((1.0 + rate) ** -years.astype(float)))


# -- annualised investment cost -------------------------------------------------

@dataclass(frozen=True)
class AIC:
    storage_energy_capex: float = 0.0
    storage_power_capex: float = 0.0
    storage_fixed_om: float = 0.0
    storage_charging: float = 0.0
    line_capex: float = 0.0
    energy_purchase: float = 0.0
    nonserved: float = 0.0

    @property
    def storage(self) -> float:
        return (self.storage_energy_capex + self.storage_power_capex + self.storage_fixed_om
                + self.storage_charging)

    @property
    def capex(self) -> float:
        return self.storage_energy_capex + self.storage_power_capex + self.line_capex

    @property
    def total(self) -> float:
        """Investment-side AIC: capex + fixed O&M + storage charging."""
        return self.storage + self.line_capex

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(storage=self.storage, total=self.total)
        return d


def storage_aic(power_kw: float, energy_kwh: float, book: CostBook) -> AIC:
    f = crf(book.discount_rate, book.storage_life_years)
    return AIC(storage_energy_capex=energy_kwh * book.energy_usd_per_kwh
               * (1.0 + book.degradation_per_yr) * f,
               storage_power_capex=power_kw * book.power_usd_per_kw * f,
               storage_fixed_om=power_kw * book.om_usd_per_kw_yr)


def line_aic(km: float, book: CostBook) -> float:
    return km * book.line_usd_per_km * crf(book.discount_rate, book.line_life_years)


def annualized_cost(design: "SystemDesign", book: CostBook, new_only: bool = True) -> AIC:
    """Itemised AIC of a design.

    Storage capex is annualised over the storage life with the energy part
    scaled by (1 + degradation); O&M is per kW-yr; charging is priced at the
    tariff schedule. ``new_only`` restricts capex to newly built assets.
    """
    power = sum(u.new_power_kw if new_only else u.power_kw for u in design.storage)
    energy = sum(u.new_energy_kwh if new_only else u.energy_kwh for u in design.storage)
    base = storage_aic(power, energy, book)
    disp = design.dispatch
    charging = 0.0
    purchase = 0.0
    nonserved = 0.0
    if disp:
        w = disp["weight"]
        tariff = book.tariff(disp["hour_of_year"])
        if "charge_mw" in disp:
            charging = float(np.sum(w * tariff * disp["charge_mw"].sum(axis=1)))
        purchase = float(np.sum(w * tariff * disp["import_mw"]))
        nonserved = float(np.sum(w * disp["nonserved_mw"].sum(axis=1))) * book.voll_usd_per_mwh
    return replace(base, storage_charging=charging, line_capex=line_aic(design.upgraded_km, book),
                   energy_purchase=purchase, nonserved=nonserved)


# -- option value ----------------------------------------------------------------

@dataclass(frozen=True)
class OptionValuation:
    aic_traditional: float
    aic_storage: float
    aic_deferred: float
    deferral: int
    horizon: int
    rate: float
    option_value: float  # USD/yr, NWA_FEASIBLE_SIGN * (traditional - storage/deferred path)

    @property
    def nwa_feasible(self) -> bool:
        return self.option_value > 0

    def to_dict(self) -> dict:
        return {**asdict(self), "nwa_feasible": self.nwa_feasible}


def option_cost(aic_traditional: float, aic_storage: float, aic_deferred: float, p: int,
                horizon: int, rate: float = 0.09) -> OptionValuation:
    """Deferral option value per year over ``[0, horizon]``.

    Traditional upgrades are paid over the whole horizon; the NWA path pays
    storage over ``[0, p]`` and the deferred upgrade over ``[p, horizon]``.
    Present values use end-of-year discounting and are re-expressed as a level
    annual amount over the horizon.
    """
    if p <= 0:
        raise ValueError("deferral period p must be positive")
    if p > horizon:
        raise ValueError("deferral period exceeds the horizon")
    if min(aic_traditional, aic_storage, aic_deferred) < 0:
        raise ValueError("AICs must be non-negative")
    full = annuity_factor(rate, 0, horizon)
    pv_trad = aic_traditional * full
    pv_nwa = aic_storage * annuity_factor(rate, 0, p) + aic_deferred * annuity_factor(rate, p, horizon)
    value = NWA_FEASIBLE_SIGN * (pv_trad - pv_nwa) / full
    return OptionValuation(float(aic_traditional), float(aic_storage), float(aic_deferred),
                           int(p), int(horizon), float(rate), float(value))


def expected_option_value(row, option_costs) -> float:
    """Sum over successor states of P(s, s') * O^{s'}(p)."""
    row = np.asarray(row, float)
    costs = np.asarray(option_costs, float)
    if row.shape != costs.shape:
        raise ValueError(f"dimension mismatch: {row.shape} vs {costs.shape}")
    if abs(row.sum() - 1.0) > 1e-9:
        raise ValueError("transition row must sum to 1")
    return float(row @ costs)


class NoSignChangeError(ValueError):
    pass


@dataclass(frozen=True)
class Breakeven:
    energy_usd_per_kwh: float
    power_usd_per_kw: float
    t: float                # position on the ray, 0 = low point
    option_value: float     # at the returned point (<= 0 side)
    iterations: int


def breakeven_storage_cost(option_value: Callable[[float, float], float], low: tuple,
                           high: tuple, tol: float = 1.0, max_iter: int = 200) -> Breakeven:
    """Bisection on the segment low -> high for the storage cost where the NWA stops paying.

    ``option_value(energy_usd_per_kwh, power_usd_per_kw)`` must be positive at
    ``low`` and non-positive at ``high``. The returned point is on the
    non-positive side of the crossing with ``|option_value| <= tol`` (or a
    bracket narrower than 1e-12 of the ray, for step-shaped value functions).
    """
    low = np.asarray(low, float)
    high = np.asarray(high, float)

    def at(t):
        e, pw = low + t * (high - low)
        return option_value(float(e), float(pw))

    v_lo, v_hi = at(0.0), at(1.0)
    if not (v_lo > 0 and v_hi <= 0):
        raise NoSignChangeError(
            f"no sign change on the ray: option value {v_lo:.3f} at low, {v_hi:.3f} at high")
    a, b = 0.0, 1.0
    vb = v_hi
    it = 0
    while it < max_iter and not (abs(vb) <= tol) and b - a > 1e-12:
        mid = 0.5 * (a + b)
        vm = at(mid)
        if vm > 0:
            a = mid
        else:
            b, vb = mid, vm
        it += 1
    e, pw = low + b * (high - low)
    return Breakeven(float(e), float(pw), float(b), float(vb), it)


def capital_utilization_rate(loading, capacity) -> float:
    """Mean over periods of loading / capacity (capacity may vary per period)."""
    cap = np.asarray(capacity, float)
    if not np.all(cap > 0):
        raise ValueError("capacity must be positive")
    w = np.asarray(loading, float)
    return float(np.mean(w / cap)) if w.size else 0.0
