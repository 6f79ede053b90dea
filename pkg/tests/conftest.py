import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gridnwa.demand import DATA_DIR, Demand, load_demand_csv
from gridnwa.network import load_network

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

MID_2030 = 1.0668 ** 10  # 2020 -> 2030 at the mid-bucket growth rate


@pytest.fixture(scope="session")
def sample_network():
    return load_network(DATA_DIR / "sample_feeder.json")


@pytest.fixture(scope="session")
def two_bus():
    return load_network(DATA_DIR / "two_bus.json")


@pytest.fixture(scope="session")
def base_demand():
    return load_demand_csv(DATA_DIR / "demand_2020.csv")


def flat_demand(mw, hours=168, bus=1):
    return Demand((bus,), np.full((hours, 1), float(mw)))


@pytest.fixture(scope="session")
def mid2030_design(sample_network, base_demand):
    """Full-8760 storage-only design at 2030 mid growth (no lost load)."""
    from gridnwa.dispatch import DispatchOptions, optimize_design
    from gridnwa.valuation import CostBook
    opts = DispatchOptions(allow_upgrades=False, allow_nonserved=False)
    return optimize_design(sample_network, None, base_demand.scaled(MID_2030), CostBook(), opts)


@pytest.fixture(scope="session")
def city_study():
    from gridnwa.scaleup import CityStudy
    return CityStudy.load(DATA_DIR / "city_study.json")


@pytest.fixture(scope="session")
def class_study(sample_network, base_demand, city_study):
    """Class study shared across tests so cached representative-feeder solves are reused."""
    from gridnwa.scaleup import ClassStudy
    return ClassStudy.from_study(sample_network, base_demand, city_study)


@pytest.fixture(scope="session")
def cost_triplet(city_study, class_study):
    from gridnwa.scaleup import COST_VARIANTS, cost_sensitivity
    from gridnwa.valuation import CostBook
    return cost_sensitivity(city_study, class_study, CostBook(), COST_VARIANTS)
