"""Multi-stage storage-vs-upgrade planning as a Markov decision process.

Two layers live here. The first is a generic finite MDP toolkit (policy and
value iteration, plus a time-augmented builder for finite-horizon problems).
The second is the feeder planner that walks one growth trajectory, detects
overloads with an operate-only dispatch solve and chooses between a storage
NWA and a traditional upgrade from the expected deferral option value.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .demand import ConvergenceError, Demand, TransitionMatrix, sample_trajectory
from .dispatch import (DesignInfeasibleError, DispatchHorizon, DispatchOptions, SystemDesign,
                       optimize_design, representative_weeks)
from .network import Network
from .valuation import (CostBook, annualized_cost, capital_utilization_rate,
                        expected_option_value, line_aic, option_cost, storage_aic)

log = logging.getLogger(__name__)

ACTIONS = ("no_action", "storage_nwa", "traditional_upgrade")


# -- generic finite MDP --------------------------------------------------------------

@dataclass(frozen=True)
class FiniteMDP:
    """Cost-minimising MDP. ``transitions[a, s, s']`` and ``costs[s, a]``."""

    transitions: np.ndarray
    costs: np.ndarray
    discount: float

    def __post_init__(self):
        P = np.asarray(self.transitions, float)
        C = np.asarray(self.costs, float)
        if P.ndim != 3 or P.shape[1] != P.shape[2]:
            raise ValueError("transitions must have shape (A, S, S)")
        if C.shape != (P.shape[1], P.shape[0]):
            raise ValueError(f"costs must have shape (S, A) = {(P.shape[1], P.shape[0])}")
        if np.any(P < -1e-12) or np.max(np.abs(P.sum(axis=2) - 1.0)) > 1e-9:
            raise ValueError("every transition row must be a probability vector")
        if not 0 <= self.discount < 1:
            raise ValueError("discount must lie in [0, 1)")
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "costs", C)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[0]

    def q_values(self, values: np.ndarray) -> np.ndarray:
        """Q[s, a] = c(s, a) + discount * sum_s' P(s'|s, a) V(s')."""
        return self.costs + self.discount * np.einsum("ast,t->sa", self.transitions, values)

    def evaluate(self, policy: np.ndarray) -> np.ndarray:
        """Exact policy evaluation: solve (I - discount * P_pi) V = c_pi."""
        s = np.arange(self.n_states)
        P_pi = self.transitions[policy, s, :]
        c_pi = self.costs[s, policy]
        return np.linalg.solve(np.eye(self.n_states) - self.discount * P_pi, c_pi)


def stage_value(stage_cost: float, successor_values, row, discount: float) -> float:
    """F(s) + discount * sum_s' P(s, s') Q(s')."""
    row = np.asarray(row, float)
    succ = np.asarray(successor_values, float)
    if row.shape != succ.shape:
        raise ValueError(f"dimension mismatch: {row.shape} vs {succ.shape}")
    return float(stage_cost + discount * (row @ succ))


def policy_iteration(mdp: FiniteMDP, tol: float = 1e-12, max_iter: int = 1000,
                     initial_policy=None):
    """Howard policy iteration; returns ``(policy, values)``.

    The current action is kept unless another improves it by more than
    ``tol`` (scaled), which rules out cycling between tied actions.
    """
    policy = (np.zeros(mdp.n_states, int) if initial_policy is None
              else np.asarray(initial_policy, int).copy())
    s = np.arange(mdp.n_states)
    for _ in range(max_iter):
        values = mdp.evaluate(policy)
        q = mdp.q_values(values)
        best = q.argmin(axis=1)
        slack = tol * (1.0 + np.abs(values))
        improve = q[s, best] < q[s, policy] - slack
        if not improve.any():
            return policy, values
        policy = np.where(improve, best, policy)
    raise ConvergenceError(f"policy iteration did not stabilise in {max_iter} iterations",
                           float(np.max(q[s, policy] - q[s, best])))


def value_iteration(mdp: FiniteMDP, tol: float = 1e-10, max_iter: int = 1_000_000):
    """Successive approximation until the sup-norm update is below ``tol``."""
    values = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        q = mdp.q_values(values)
        new = q.min(axis=1)
        delta = float(np.max(np.abs(new - values)))
        values = new
        if delta < tol:
            return q.argmin(axis=1), values
    raise ConvergenceError(f"value iteration did not converge in {max_iter} sweeps", delta)


def finite_horizon_mdp(stage_costs, transitions, discount: float) -> FiniteMDP:
    """Time-augmented MDP for a K-stage problem.

    ``stage_costs[k, s, a]`` and ``transitions[a, s, s']``. The state
    ``k * S + s`` moves to stage ``k + 1``; after the last stage all mass
    goes to one absorbing zero-cost terminal state (index ``K * S``).
    """
    C = np.asarray(stage_costs, float)
    P = np.asarray(transitions, float)
    K, S, A = C.shape
    n = K * S + 1
    T = np.zeros((A, n, n))
    costs = np.zeros((n, A))
    for k in range(K):
        rows = slice(k * S, (k + 1) * S)
        costs[rows] = C[k]
        if k + 1 < K:
            T[:, rows, (k + 1) * S:(k + 2) * S] = P
        else:
            T[:, rows, n - 1] = 1.0
    T[:, n - 1, n - 1] = 1.0
    return FiniteMDP(T, costs, discount)


# -- feeder planner ------------------------------------------------------------------

@dataclass(frozen=True)
class PlanConfig:
    start_year: int = 2020
    horizon_years: int = 20
    period_years: int = 5
    start_state: str = "Mid"
    representative_weeks: int | None = 4   # None: full 8760-hour stages
    option_horizon_years: int | None = None  # None: horizon_years
    storage_buses: tuple | None = None
    policy: str = "flexible"               # "traditional": never consider storage

    def __post_init__(self):
        if self.period_years <= 0 or self.horizon_years % self.period_years:
            raise ValueError("horizon must divide into whole periods of length p")
        if self.policy not in ("flexible", "traditional"):
            raise ValueError(f"unknown policy {self.policy!r}")

    @property
    def n_stages(self) -> int:
        return self.horizon_years // self.period_years


@dataclass(frozen=True)
class StorageAsset:
    bus: int
    power_mw: float
    energy_mwh: float
    installed_year: int
    retire_year: int


@dataclass(frozen=True)
class PlanState:
    period: int
    year: int
    growth_state: str
    demand_factor: float
    storage: tuple = ()          # StorageAsset, active at ``year``
    line_added_mw: tuple = ()    # sorted (line id, added rated MW)

    def __post_init__(self):
        for a in self.storage:
            if a.retire_year <= self.year:
                raise ValueError("inactive storage unit carried in the state")


@dataclass
class PolicyDecision:
    action: str
    stage_cost: float
    design: SystemDesign | None = None
    expected_option_value: float | None = None
    option_values: tuple = ()
    storage_power_kw: float = 0.0
    storage_energy_kwh: float = 0.0
    upgraded_km: float = 0.0
    new_storage_kwh: float = 0.0
    peak_import_mw: float = 0.0
    substation_capacity_mw: float = 0.0


@dataclass
class PlanTrajectory:
    steps: list = field(default_factory=list)   # (PlanState, PolicyDecision)
    discount: float = 1.0
    termination: str = "horizon"

    @property
    def total_discounted_cost(self) -> float:
        return float(sum(d.stage_cost * self.discount ** k for k, (_, d) in enumerate(self.steps)))

    def records(self) -> list[dict]:
        out, cum = [], 0.0
        for k, (st, d) in enumerate(self.steps):
            disc = d.stage_cost * self.discount ** k
            cum += disc
            out.append({
                "period": st.period, "year": st.year, "state": st.growth_state,
                "demand_factor": st.demand_factor, "action": d.action,
                "storage_power_kw": d.storage_power_kw, "storage_energy_kwh": d.storage_energy_kwh,
                "new_storage_kwh": d.new_storage_kwh, "upgraded_km": d.upgraded_km,
                "expected_option_value_usd_per_yr": d.expected_option_value,
                "option_values_usd_per_yr": list(d.option_values),
                "peak_import_mw": d.peak_import_mw,
                "substation_capacity_mw": d.substation_capacity_mw,
                "stage_cost_usd_per_yr": d.stage_cost, "discounted_cost_usd": disc,
                "cumulative_discounted_cost_usd": cum,
            })
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())


class StageOracle:
    """Memoised dispatch solves keyed by demand factor and installed assets.

    Solves are pure functions of their inputs, so the cache can be shared by
    every trajectory of a Monte Carlo study.
    """

    def __init__(self, network: Network, base: Demand, book: CostBook, config: PlanConfig):
        self.network = network
        self.book = book
        self.config = config
        if config.representative_weeks:
            self.base, self.horizon = representative_weeks(base, config.representative_weeks)
        else:
            self.base, self.horizon = base, DispatchHorizon.full_year(base.hours)
        self._cache: dict = {}
        self.solves = 0

    def solve(self, factor: float, storage: tuple, lines: tuple, mode: str):
        key = (round(factor, 12), tuple((a.bus, a.power_mw, a.energy_mwh) for a in storage),
               lines, mode)
        if key not in self._cache:
            self._cache[key] = self._solve(factor, storage, lines, mode)
        return self._cache[key]

    def _solve(self, factor, storage, lines, mode):
        existing: dict = {}
        for a in storage:
            p, e = existing.get(a.bus, (0.0, 0.0))
            existing[a.bus] = (p + a.power_mw, e + a.energy_mwh)
        net = self.network.with_line_capacity(dict(lines)) if lines else self.network
        opts = {
            "operate": dict(allow_storage=False, allow_upgrades=False, allow_nonserved=True),
            "storage": dict(allow_storage=True, allow_upgrades=False, allow_nonserved=False),
            "upgrade": dict(allow_storage=False, allow_upgrades=True, allow_nonserved=False),
        }[mode]
        options = DispatchOptions(existing_storage=existing if mode != "upgrade" else {},
                                  storage_buses=self.config.storage_buses, **opts)
        self.solves += 1
        try:
            return optimize_design(net, None, self.base.scaled(factor), self.book, options,
                                   self.horizon)
        except DesignInfeasibleError:
            if mode == "storage":
                return None   # storage alone cannot relieve this demand level
            raise


def _variable_cost(design: SystemDesign) -> float:
    b = design.cost_breakdown
    return b["supply_variable"] + b["storage_variable"] + b["startup"] + b["nonserved"]


def _storage_assets_aic(storage: tuple, book: CostBook) -> float:
    return sum(storage_aic(a.power_mw * 1e3, a.energy_mwh * 1e3, book).total
               for a in storage)


def _substation_capacity(network: Network, added: dict) -> float:
    sub = network.substation.id
    return float(sum(ln.capacity_mw + added.get(ln.id, 0.0) for ln in network.lines
                     if sub in (ln.from_bus, ln.to_bus)))


def trajectory_cur(traj: PlanTrajectory) -> float:
    """Capital utilisation of the substation connection over the logged stages."""
    loads = [d.peak_import_mw for _, d in traj.steps]
    caps = [d.substation_capacity_mw for _, d in traj.steps]
    return capital_utilization_rate(loads, caps)


def _upgrade_km(network: Network, lines: tuple) -> float:
    return float(sum(network.line(i).length_km for i, _ in lines))


def simulate_plan(network: Network, base: Demand, matrix: TransitionMatrix, book: CostBook,
                  config: PlanConfig = PlanConfig(), seed=None, rng=None,
                  oracle: StageOracle | None = None) -> PlanTrajectory:
    """Walk one sampled growth trajectory through the storage-or-upgrade flowchart."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    oracle = oracle or StageOracle(network, base, book, config)
    p = config.period_years
    gamma = (1.0 + book.discount_rate) ** -p
    n_opt = config.option_horizon_years or config.horizon_years
    growth = sample_trajectory(matrix, config.start_state, config.n_stages, period_years=p, rng=rng)
    traj = PlanTrajectory(discount=gamma)

    factor = 1.0
    storage: tuple = ()
    lines: tuple = ()
    for k, (_, state_name, g) in enumerate(growth.periods):
        factor *= 1.0 + g
        year = config.start_year + (k + 1) * p
        storage = tuple(a for a in storage if a.retire_year > year)
        st = PlanState(k + 1, year, state_name, factor, storage, lines)
        try:
            decision, storage, lines = _decide(st, oracle, matrix, book, p, n_opt)
            decision.peak_import_mw = decision.design.peak_import_mw
            decision.substation_capacity_mw = _substation_capacity(network, dict(lines))
        except DesignInfeasibleError as exc:
            raise DesignInfeasibleError(f"stage {k + 1} ({year}, {state_name}): {exc}") from exc
        traj.steps.append((st, decision))
        if decision.action == "traditional_upgrade":
            traj.termination = "traditional_upgrade"
            break
    return traj


def _decide(st: PlanState, oracle: StageOracle, matrix: TransitionMatrix, book: CostBook,
            p: int, n_opt: int):
    net = oracle.network
    lines_aic = line_aic(_upgrade_km(net, st.line_added_mw), book)
    operate = oracle.solve(st.demand_factor, st.storage, st.line_added_mw, "operate")
    if operate.nonserved_mwh <= 1e-6:
        cost = _storage_assets_aic(st.storage, book) + lines_aic + _variable_cost(operate)
        return (PolicyDecision("no_action", cost, operate, storage_power_kw=operate.storage_power_kw,
                               storage_energy_kwh=operate.storage_energy_kwh),
                st.storage, st.line_added_mw)

    # overload: value the deferral option against each successor growth outcome
    now = None
    if oracle.config.policy == "flexible":
        now = oracle.solve(st.demand_factor, st.storage, st.line_added_mw, "storage")
    values = []
    if now is not None:
        a_now = annualized_cost(now, book).storage
        for g in matrix.growth:
            f_next = st.demand_factor * (1.0 + g) ** p
            trad = oracle.solve(f_next, (), st.line_added_mw, "upgrade")
            a_trad = line_aic(trad.upgraded_km, book)
            stor = oracle.solve(f_next, st.storage, st.line_added_mw, "storage")
            if stor is None:
                # storage cannot carry this outcome: it is stranded and the upgrade is not deferred
                val = option_cost(a_trad, a_now + a_trad, a_trad, p, n_opt, book.discount_rate)
            else:
                val = option_cost(a_trad, annualized_cost(stor, book).storage, a_trad, p, n_opt,
                                  book.discount_rate)
            values.append(val.option_value)
        expected = expected_option_value(matrix.row(st.growth_state), values)
    else:
        expected = -np.inf

    if expected > 0:
        design = now
        added = tuple(
            StorageAsset(u.bus, u.new_power_kw / 1e3, u.new_energy_kwh / 1e3, st.year,
                         st.year + book.storage_life_years)
            for u in design.storage if u.new_power_kw > 1e-9 or u.new_energy_kwh > 1e-9)
        storage = st.storage + added
        cost = _storage_assets_aic(storage, book) + lines_aic + _variable_cost(design)
        return (PolicyDecision("storage_nwa", cost, design, float(expected), tuple(values),
                               design.storage_power_kw, design.storage_energy_kwh,
                               new_storage_kwh=design.new_storage_energy_kwh),
                storage, st.line_added_mw)

    # traditional upgrade supersedes (and retires) any storage
    design = oracle.solve(st.demand_factor, (), st.line_added_mw, "upgrade")
    added = dict(st.line_added_mw)
    for lid in design.line_upgrades:
        # reconductoring doubles the line's current rating
        prior = added.get(lid, 0.0)
        added[lid] = prior + net.line(lid).capacity_mw + prior
    lines = tuple(sorted(added.items()))
    km = _upgrade_km(net, lines)
    cost = line_aic(km, book) + _variable_cost(design)
    exp = float(expected) if np.isfinite(expected) else None
    return (PolicyDecision("traditional_upgrade", cost, design, exp, tuple(values),
                           upgraded_km=design.upgraded_km), (), lines)


@dataclass
class StudyResult:
    trajectories: list
    mean_cost: float
    stderr_cost: float
    decision_frequency: dict   # year -> action -> count
    solves: int

    def summary(self) -> dict:
        return {"n_trajectories": len(self.trajectories),
                "mean_total_discounted_cost_usd": self.mean_cost,
                "stderr_total_discounted_cost_usd": self.stderr_cost,
                "decision_frequency": {str(y): v for y, v in self.decision_frequency.items()},
                "dispatch_solves": self.solves}


def monte_carlo(network: Network, base: Demand, matrix: TransitionMatrix, book: CostBook,
                config: PlanConfig = PlanConfig(), n_trajectories: int = 1000,
                seed: int = 42) -> StudyResult:
    """Independent trajectories on spawned sub-seeds sharing one solve cache."""
    oracle = StageOracle(network, base, book, config)
    children = np.random.SeedSequence(seed).spawn(n_trajectories)
    trajs = [simulate_plan(network, base, matrix, book, config,
                           rng=np.random.default_rng(c), oracle=oracle) for c in children]
    costs = np.array([t.total_discounted_cost for t in trajs])
    freq: dict = {}
    for t in trajs:
        for st, d in t.steps:
            freq.setdefault(st.year, {a: 0 for a in ACTIONS})[d.action] += 1
    se = float(costs.std(ddof=1) / np.sqrt(costs.size)) if costs.size > 1 else 0.0
    return StudyResult(trajs, float(costs.mean()), se, dict(sorted(freq.items())), oracle.solves)
