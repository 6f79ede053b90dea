import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats
from scipy.integrate import quad

from gridnwa.demand import (DATA_DIR, DEFAULT_MATRIX, ConvergenceError, Demand, GrowthDistribution,
                            MCMCConfig, TransitionMatrix, bucket_masses, build_transition_matrix,
                            growth_samples, load_consumption_csv, mcmc_fit, sample_trajectory,
                            scale_demand)

from conftest import MID_2030
from oracles import mc_transition_matrix

TABLE2 = np.array([[0.34, 0.33, 0.33], [0.38, 0.32, 0.30], [0.20, 0.80, 0.00]])


@pytest.fixture(scope="module")
def china_growth():
    return growth_samples(load_consumption_csv(DATA_DIR / "china_consumption.csv")[1])


@pytest.fixture(scope="module")
def china_fit(china_growth):
    return mcmc_fit(china_growth, MCMCConfig(seed=42))


def point_mass(g):
    return GrowthDistribution("empirical", (g,))


# growth_samples

def test_growth_samples_ratio():
    np.testing.assert_allclose(growth_samples([100, 110]), [0.10])
    np.testing.assert_array_equal(growth_samples([50, 50, 50]), [0.0, 0.0])


@pytest.mark.parametrize("bad", [[100], [], [10, 0, 5], [10, -1]])
def test_growth_samples_rejects(bad):
    with pytest.raises(ValueError):
        growth_samples(bad)


def test_china_growth_mean(china_growth):
    with open(DATA_DIR / "china_consumption.csv") as fh:
        vals = [float(r["kwh_per_capita"]) for r in csv.DictReader(fh)]
    manual = sum(b / a - 1 for a, b in zip(vals, vals[1:])) / (len(vals) - 1)
    assert china_growth.mean() == pytest.approx(manual, rel=1e-12)
    assert 0 < manual < 0.15


# mcmc_fit

def test_mcmc_recovers_known_gompertz():
    x = stats.gompertz.rvs(2.0, scale=0.05, size=2000, random_state=np.random.default_rng(1))
    fit = mcmc_fit(x, MCMCConfig(chain_length=50_000, seed=42))
    shape, scale = fit.params
    assert shape == pytest.approx(2.0, rel=0.10)
    assert scale == pytest.approx(0.05, rel=0.10)


def test_mcmc_degenerate_samples():
    with pytest.raises(ValueError):
        mcmc_fit(np.full(20, 0.06))


def test_mcmc_config_validation():
    with pytest.raises(ValueError):
        mcmc_fit([0.01, 0.05], MCMCConfig(chain_length=10))
    with pytest.raises(ValueError):
        mcmc_fit([])


def test_mcmc_non_convergence_reports_diagnostic(china_growth):
    cfg = MCMCConfig(chain_length=1000, tol=1e-12, max_iterations=2000)
    with pytest.raises(ConvergenceError) as exc:
        mcmc_fit(china_growth, cfg)
    assert exc.value.diagnostic > 1e-12


def test_china_fit_bucket_masses_positive(china_fit):
    c, s = china_fit.params
    pdf = lambda x: stats.gompertz.pdf(x, c, scale=s)
    low = quad(pdf, 0, 0.05)[0]
    mid = quad(pdf, 0.05, 0.08)[0]
    high = quad(pdf, 0.08, np.inf, limit=200)[0]
    got = bucket_masses(china_fit)
    np.testing.assert_allclose(got, [low, mid, high], atol=1e-6)
    assert min(got) > 0


def test_fitted_density_integrates_to_one(china_fit):
    lo, hi = china_fit.support
    total = quad(china_fit.pdf, lo, hi, limit=500)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_mcmc_seed_determinism_and_stationarity(china_growth, china_fit):
    again = mcmc_fit(china_growth, MCMCConfig(seed=42))
    assert again.params == china_fit.params
    other = mcmc_fit(china_growth, MCMCConfig(seed=7))
    np.testing.assert_allclose(bucket_masses(other), bucket_masses(china_fit), atol=0.02)


# bucket_masses

def test_bucket_masses_uniform():
    np.testing.assert_allclose(bucket_masses(GrowthDistribution("uniform", (0.0, 0.10))),
                               (0.5, 0.3, 0.2), atol=1e-12)


def test_bucket_masses_point_mass():
    assert bucket_masses(point_mass(0.06)) == (0.0, 1.0, 0.0)


def test_bucket_boundaries_go_to_mid():
    assert bucket_masses(point_mass(0.05)) == (0.0, 1.0, 0.0)
    assert bucket_masses(point_mass(0.08)) == (0.0, 1.0, 0.0)


@given(st.floats(0.05, 5.0), st.floats(0.005, 0.2))
def test_bucket_masses_sum_to_one(shape, scale):
    m = bucket_masses(GrowthDistribution.gompertz(shape, scale))
    assert abs(sum(m) - 1) <= 1e-9
    assert min(m) >= 0


# transition matrix

def test_table2_accepted_verbatim():
    tm = TransitionMatrix(TABLE2)
    np.testing.assert_array_equal(tm.p, TABLE2)
    np.testing.assert_allclose(tm.p.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_array_equal(DEFAULT_MATRIX, TABLE2)


@pytest.mark.parametrize("bad", [np.ones((3, 3)), np.eye(2), -np.eye(3) + 2 * np.eye(3)[[1, 2, 0]]])
def test_transition_matrix_validation(bad):
    with pytest.raises(ValueError):
        TransitionMatrix(bad)


def test_point_mass_matrix_mid_absorbing():
    tm = build_transition_matrix(point_mass(0.06))
    assert tm.p[1, 1] == 1.0
    np.testing.assert_allclose(tm.p.sum(axis=1), 1.0, atol=1e-9)


def test_fitted_matrix_matches_monte_carlo(china_fit):
    tm = build_transition_matrix(china_fit)
    np.testing.assert_allclose(tm.p.sum(axis=1), 1.0, atol=1e-9)
    rng = np.random.default_rng(2024)
    mc = mc_transition_matrix(china_fit.sample, (0.05, 0.08), 10**6, rng)
    np.testing.assert_allclose(tm.p, mc, atol=0.01)


def test_representative_growth_is_conditional_mean(china_fit):
    tm = build_transition_matrix(china_fit)
    c, s = china_fit.params
    pdf = lambda x: stats.gompertz.pdf(x, c, scale=s)
    num = quad(lambda x: x * pdf(x), 0.05, 0.08)[0]
    den = quad(pdf, 0.05, 0.08)[0]
    assert tm.growth[1] == pytest.approx(num / den, rel=1e-6)
    assert tm.growth[0] < 0.05 <= tm.growth[1] <= 0.08 < tm.growth[2]


# trajectories

def test_high_never_followed_by_high():
    tm = TransitionMatrix(TABLE2)
    rng = np.random.default_rng(0)
    for _ in range(200):
        st_ = sample_trajectory(tm, "High", 30, rng=rng).states
        seq = ["High"] + st_
        assert not any(a == b == "High" for a, b in zip(seq, seq[1:]))


def test_identity_matrix_stays_put():
    tr = sample_trajectory(TransitionMatrix(np.eye(3)), "Mid", 5, seed=1)
    assert tr.states == ["Mid"] * 5
    assert len(tr) == 5


def test_one_step_frequencies_from_low():
    tm = TransitionMatrix(TABLE2)
    rng = np.random.default_rng(99)
    n = 10**6
    # vectorised replay of the same inverse-CDF draw sample_trajectory uses
    u = rng.uniform(size=n)
    idx = np.minimum(np.searchsorted(np.cumsum(tm.p[0]), u, side="right"), 2)
    freq = np.bincount(idx, minlength=3) / n
    np.testing.assert_allclose(freq, TABLE2[0], atol=0.005)
    # and the public sampler on a smaller draw is consistent with it
    states = [sample_trajectory(tm, "Low", 1, rng=rng).states[0] for _ in range(20000)]
    f2 = np.array([states.count(s) for s in ("Low", "Mid", "High")]) / len(states)
    np.testing.assert_allclose(f2, TABLE2[0], atol=0.02)


def test_trajectory_seed_reproducible():
    tm = TransitionMatrix(TABLE2)
    a = sample_trajectory(tm, "Mid", 20, seed=5, period_years=5)
    b = sample_trajectory(tm, "Mid", 20, seed=5, period_years=5)
    assert a == b
    assert set(a.states) <= {"Low", "Mid", "High"}


def test_trajectory_growth_compounds_over_period():
    tm = TransitionMatrix(np.eye(3), growth=[0.03, 0.06, 0.1])
    tr = sample_trajectory(tm, "Mid", 2, seed=0, period_years=5)
    np.testing.assert_allclose(tr.growth, [1.06**5 - 1] * 2)


def test_horizon_must_be_positive():
    with pytest.raises(ValueError):
        sample_trajectory(TransitionMatrix(TABLE2), "Low", 0)


# scale_demand

def test_scale_demand_identity_and_doubling():
    prof = np.array([1.0, 6.7, 3.0])
    np.testing.assert_array_equal(scale_demand(prof, 0.0), prof)
    assert scale_demand(prof, 1.0).max() == pytest.approx(13.4)
    with pytest.raises(ValueError):
        scale_demand(prof, -1.0)


def test_delhi_2030_peak_in_table1_bracket(base_demand):
    # five compounded 2-year periods at the mid-bucket rate (2020 -> 2030)
    delhi = base_demand.total / base_demand.peak_mw * 6.7
    grown = scale_demand(delhi, MID_2030 - 1)
    assert 12.7 <= grown.max() <= 15.2


def test_demand_container(base_demand):
    assert base_demand.hours == 8760
    assert base_demand.scaled(2.0).peak_mw == pytest.approx(2 * base_demand.peak_mw)
    with pytest.raises(ValueError):
        Demand((1, 2), np.zeros((4, 3)))
