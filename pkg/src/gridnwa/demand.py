"""Demand-growth uncertainty: MCMC fit, growth buckets, Markov trajectories."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.integrate import quad

log = logging.getLogger(__name__)

STATES = ("Low", "Mid", "High")
THRESHOLDS = (0.05, 0.08)

# Table-style default transition matrix shipped as the canonical input
DEFAULT_MATRIX = np.array([[0.34, 0.33, 0.33],
                           [0.38, 0.32, 0.30],
                           [0.20, 0.80, 0.00]])
# conditional bucket means of the bundled China fit (seed 42), annual growth
DEFAULT_GROWTH = np.array([0.0321, 0.0668, 0.0996])


class ConvergenceError(RuntimeError):
    def __init__(self, msg, diagnostic):
        super().__init__(msg)
        self.diagnostic = diagnostic


@dataclass(frozen=True)
class GrowthDistribution:
    """Distribution of per-year demand growth fractions.

    ``kind`` is "gompertz" (params = (shape, scale)), "empirical"
    (params = sorted samples) or "uniform" (params = (lo, hi)).
    """

    kind: str
    params: tuple
    info: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "gompertz":
            c, s = self.params
            if not (c > 0 and s > 0):
                raise ValueError("Gompertz parameters must be positive")
        elif self.kind == "empirical":
            if len(self.params) == 0:
                raise ValueError("empirical distribution needs samples")
            object.__setattr__(self, "params", tuple(sorted(float(v) for v in self.params)))
        elif self.kind == "uniform":
            lo, hi = self.params
            if not hi > lo:
                raise ValueError("uniform needs hi > lo")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def gompertz(cls, shape, scale, **info):
        return cls("gompertz", (float(shape), float(scale)), info)

    @property
    def frozen(self):
        if self.kind == "gompertz":
            return stats.gompertz(self.params[0], scale=self.params[1])
        if self.kind == "uniform":
            lo, hi = self.params
            return stats.uniform(lo, hi - lo)
        return None

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "empirical":
            return self.params[0], self.params[-1]
        return tuple(float(v) for v in self.frozen.support())

    def pdf(self, x):
        if self.kind == "empirical":
            raise ValueError("empirical distribution has no density")
        return self.frozen.pdf(x)

    def cdf(self, x):
        """P(g <= x)."""
        if self.kind == "empirical":
            s = np.asarray(self.params)
            return np.searchsorted(s, x, side="right") / s.size
        return self.frozen.cdf(x)

    def prob_below(self, x):
        """P(g < x)."""
        if self.kind == "empirical":
            s = np.asarray(self.params)
            return np.searchsorted(s, x, side="left") / s.size
        return self.frozen.cdf(x)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "empirical":
            return rng.choice(np.asarray(self.params), size=n)
        return self.frozen.rvs(size=n, random_state=rng)

    def conditional_mean(self, lo: float, hi: float) -> float:
        """E[g | lo <= g <= hi]; nan when the interval has no mass."""
        if self.kind == "empirical":
            s = np.asarray(self.params)
            sel = s[(s >= lo) & (s <= hi)]
            return float(sel.mean()) if sel.size else float("nan")
        a, b = max(lo, self.support[0]), min(hi, self.support[1])
        mass = self.cdf(b) - self.cdf(a)
        if not mass > 1e-15:
            return float("nan")
        num, _ = quad(lambda x: x * self.pdf(x), a, b, limit=200)
        return float(num / mass)

    def mean(self) -> float:
        if self.kind == "empirical":
            return float(np.mean(self.params))
        return float(self.frozen.mean())


@dataclass(frozen=True)
class TransitionMatrix:
    p: np.ndarray
    growth: np.ndarray = field(default_factory=lambda: DEFAULT_GROWTH.copy())
    states: tuple = STATES

    def __post_init__(self):
        p = np.array(self.p, float)
        if p.shape != (3, 3):
            raise ValueError("transition matrix must be 3x3")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.any(np.abs(p.sum(axis=1) - 1) > 1e-9):
            raise ValueError(f"rows must sum to 1, got {p.sum(axis=1)}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "growth", np.array(self.growth, float))

    @classmethod
    def default(cls) -> "TransitionMatrix":
        return cls(DEFAULT_MATRIX.copy(), DEFAULT_GROWTH.copy())

    def index(self, state) -> int:
        return state if isinstance(state, (int, np.integer)) else self.states.index(state)

    def row(self, state) -> np.ndarray:
        return self.p[self.index(state)]


@dataclass(frozen=True)
class GrowthTrajectory:
    periods: tuple  # (period index, state name, realized growth fraction over the period)

    @property
    def states(self) -> list[str]:
        return [s for _, s, _ in self.periods]

    @property
    def growth(self) -> np.ndarray:
        return np.array([g for _, _, g in self.periods])

    def __len__(self):
        return len(self.periods)


# -- data --------------------------------------------------------------------

def load_consumption_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    years = np.array([int(r["year"]) for r in rows])
    vals = np.array([float(r["kwh_per_capita"]) for r in rows])
    order = np.argsort(years)
    return years[order], vals[order]


def growth_samples(consumption_series) -> np.ndarray:
    """Year-over-year growth fractions x[i+1]/x[i] - 1."""
    x = np.asarray(consumption_series, float)
    if x.size < 2:
        raise ValueError("need at least two consumption values")
    if np.any(x <= 0):
        raise ValueError("consumption values must be positive")
    return x[1:] / x[:-1] - 1.0


# -- MCMC fit ----------------------------------------------------------------

@dataclass(frozen=True)
class MCMCConfig:
    chain_length: int = 20_000
    step_size: float = 0.05       # random-walk std in log-parameter space
    seed: int = 42
    burn_in: float = 0.2          # fraction discarded before averaging
    log_error_scale: float = 0.1  # score = -SSE / (2 * scale**2)
    n_quantiles: int = 50
    tol: float = 1e-3             # convergence threshold on running means
    max_iterations: int = 400_000


def _empirical_density(samples: np.ndarray, at: np.ndarray) -> np.ndarray:
    # Gaussian KDE reflected at 0, the lower end of the Gompertz support
    kde = stats.gaussian_kde(samples)
    f = kde(at)
    if samples.min() >= 0:
        f = f + kde(-at)
    return f


def _score(log_params, xq, log_fq, scale2):
    c, s = np.exp(log_params)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        logp = stats.gompertz.logpdf(xq, c, scale=s)
    if not np.all(np.isfinite(logp)):
        return -np.inf
    return -float(np.sum((logp - log_fq) ** 2)) / (2 * scale2)


def _running_mean_change(chain: np.ndarray, burn: int) -> float:
    post = chain[burn:]
    if len(post) < 20:
        return np.inf
    full = post.mean(axis=0)
    early = post[: int(0.9 * len(post))].mean(axis=0)
    return float(np.max(np.abs(full - early) / np.abs(full)))


def mcmc_fit(samples, config: MCMCConfig = MCMCConfig()) -> GrowthDistribution:
    """Metropolis random walk over Gompertz (shape, scale).

    The score compares the proposal log-density at the empirical quantiles with
    a KDE of the samples. The chain is extended (doubling) until the running
    mean of the parameters is stationary over its last 10%.
    """
    x = np.asarray(samples, float)
    if x.size == 0:
        raise ValueError("no samples")
    if config.chain_length < 1000:
        raise ValueError("chain_length must be at least 1000")
    if np.ptp(x) == 0 or x.size < 2:
        raise ValueError("degenerate samples: zero variance")
    if np.any(x < 0):
        raise ValueError("Gompertz support is g >= 0; negative growth samples given")
    k = min(config.n_quantiles, x.size)
    q = (np.arange(k) + 0.5) / k
    xq = np.quantile(x, q)
    log_fq = np.log(_empirical_density(x, xq))
    scale2 = config.log_error_scale ** 2

    rng = np.random.default_rng(config.seed)
    # start near a moment match: mode ~ median, scale ~ spread
    s0 = max(np.std(x), 1e-4)
    c0 = float(np.clip(np.exp(-np.median(x) / s0), 1e-3, 50))
    cur = np.log([c0, s0])
    cur_score = _score(cur, xq, log_fq, scale2)
    chain = []
    accepted = 0
    n_target = config.chain_length
    while True:
        while len(chain) < n_target:
            prop = cur + config.step_size * rng.standard_normal(2)
            ps = _score(prop, xq, log_fq, scale2)
            if np.log(rng.uniform()) < ps - cur_score:
                cur, cur_score = prop, ps
                accepted += 1
            chain.append(np.exp(cur))
        arr = np.array(chain)
        burn = int(config.burn_in * len(arr))
        diag = _running_mean_change(arr, burn)
        if diag < config.tol:
            break
        if 2 * n_target > config.max_iterations:
            raise ConvergenceError(
                f"MCMC not stationary after {len(arr)} iterations (diagnostic {diag:.3g})", diag)
        n_target *= 2
    c_hat, s_hat = arr[burn:].mean(axis=0)
    log.info("mcmc_fit: shape=%.4g scale=%.4g acc=%.2f iters=%d diag=%.2g",
             c_hat, s_hat, accepted / len(arr), len(arr), diag)
    return GrowthDistribution.gompertz(c_hat, s_hat, acceptance=accepted / len(arr),
                                       iterations=len(arr), diagnostic=diag,
                                       chain=arr)


# -- buckets and transition matrix ---------------------------------------------

def bucket_masses(dist: GrowthDistribution, thresholds=THRESHOLDS) -> tuple[float, float, float]:
    """(P(g < lo), P(lo <= g <= hi), P(g > hi))."""
    lo, hi = thresholds
    p_low = float(dist.prob_below(lo))
    p_high = float(1.0 - dist.cdf(hi))
    p_mid = 1.0 - p_low - p_high
    return p_low, max(p_mid, 0.0), p_high


def bucket_of(g, thresholds=THRESHOLDS) -> np.ndarray:
    lo, hi = thresholds
    g = np.asarray(g)
    return np.where(g < lo, 0, np.where(g > hi, 2, 1))


def representative_growth(dist: GrowthDistribution, thresholds=THRESHOLDS) -> np.ndarray:
    lo, hi = thresholds
    bounds = [(-np.inf, lo), (lo, hi), (hi, np.inf)]
    fallback = [lo / 2, (lo + hi) / 2, hi * 1.25]
    out = []
    for (a, b), fb in zip(bounds, fallback):
        m = dist.conditional_mean(a, b)
        out.append(fb if np.isnan(m) else m)
    return np.array(out)


def build_transition_matrix(dist: GrowthDistribution, thresholds=THRESHOLDS) -> TransitionMatrix:
    """P(s, s') = P(g' in s' | g in s) for two independent draws.

    Independence makes every reachable row equal to the bucket masses; a bucket
    with no mass is unreachable and gets a self-loop so the row stays
    stochastic.
    """
    masses = np.array(bucket_masses(dist, thresholds))
    joint = np.outer(masses, masses)
    p = np.eye(3)
    for s in range(3):
        if masses[s] > 0:
            p[s] = joint[s] / joint[s].sum()
    return TransitionMatrix(p, representative_growth(dist, thresholds))


def sample_trajectory(matrix: TransitionMatrix, start, horizon: int, seed=None,
                      period_years: int = 1, rng: np.random.Generator | None = None) -> GrowthTrajectory:
    """Markov chain of growth states; growth compounds ``period_years`` per step."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(seed)
    s = matrix.index(start)
    cum = np.cumsum(matrix.p, axis=1)
    out = []
    for k in range(horizon):
        s = int(np.searchsorted(cum[s], rng.uniform(), side="right"))
        s = min(s, 2)
        g = (1.0 + matrix.growth[s]) ** period_years - 1.0
        out.append((k + 1, matrix.states[s], float(g)))
    return GrowthTrajectory(tuple(out))


def scale_demand(profile, growth: float) -> np.ndarray:
    if not growth > -1:
        raise ValueError("growth must exceed -1")
    return np.asarray(profile, float) * (1.0 + growth)


@dataclass(frozen=True)
class Demand:
    """Hourly MW withdrawal per load bus: ``mw[t, k]`` for bus ``bus_ids[k]``."""

    bus_ids: tuple
    mw: np.ndarray

    def __post_init__(self):
        mw = np.asarray(self.mw, float)
        if mw.ndim != 2 or mw.shape[1] != len(self.bus_ids):
            raise ValueError("demand array must be (hours, buses)")
        object.__setattr__(self, "mw", mw)
        object.__setattr__(self, "bus_ids", tuple(int(b) for b in self.bus_ids))

    @property
    def hours(self) -> int:
        return self.mw.shape[0]

    @property
    def total(self) -> np.ndarray:
        return self.mw.sum(axis=1)

    @property
    def peak_mw(self) -> float:
        return float(self.total.max())

    def scaled(self, factor: float) -> "Demand":
        return Demand(self.bus_ids, self.mw * factor)

    def grown(self, growth: float) -> "Demand":
        return Demand(self.bus_ids, scale_demand(self.mw, growth))

    def bus(self, bus_id) -> np.ndarray:
        return self.mw[:, self.bus_ids.index(bus_id)]


def load_demand_csv(path) -> Demand:
    """CSV with an ``hour`` column and one ``bus_<id>_mw`` column per load bus."""
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, r)) for r in reader if r]
    cols = [k for k, h in enumerate(header) if h.startswith("bus_")]
    ids = [int(header[k].split("_")[1]) for k in cols]
    arr = np.array(rows)[:, cols]
    return Demand(tuple(ids), arr)


def write_demand_csv(demand: Demand, path) -> None:
    with open(path, "w") as fh:
        fh.write("hour," + ",".join(f"bus_{b}_mw" for b in demand.bus_ids) + "\n")
        for h, row in enumerate(demand.mw):
            fh.write(f"{h}," + ",".join(f"{v:.6f}" for v in row) + "\n")


DATA_DIR = Path(__file__).resolve().parent / "data"
