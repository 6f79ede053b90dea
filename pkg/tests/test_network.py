import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridnwa.dispatch import DispatchOptions, optimize_design, representative_weeks
from gridnwa.network import (Bus, Line, Network, NetworkError, load_network, network_from_dict,
                             overloaded_lines, radial_flows, write_network)
from gridnwa.valuation import CostBook

from conftest import MID_2030


def two_bus_dict(**line):
    ln = {"id": 0, "from": 0, "to": 1, "susceptance_pu": 10.0, "capacity_mw": 1.0, "length_km": 1.0}
    ln.update(line)
    return {"rated_capacity_mw": 1.0, "loading_limit_fraction": 0.9,
            "buses": [{"id": 0, "kind": "substation"}, {"id": 1, "kind": "load"}],
            "lines": [ln]}


def test_sample_feeder_loading_limit(sample_network):
    assert sample_network.substation.kind == "substation"
    assert sum(b.kind == "substation" for b in sample_network.buses) == 1
    assert sample_network.loading_limit_mw * 1000 == pytest.approx(900.0)


def test_two_bus_echoes_fields(two_bus):
    ln = two_bus.lines[0]
    assert (ln.from_bus, ln.to_bus, ln.susceptance, ln.capacity_mw) == (0, 1, 10.0, 1.0)
    assert two_bus.rated_capacity_mw == 1.0


def test_single_bus_no_lines_rejected():
    data = {"rated_capacity_mw": 1.0, "buses": [{"id": 0, "kind": "substation"}], "lines": []}
    with pytest.raises(NetworkError):
        network_from_dict(data)


@pytest.mark.parametrize("mutate", [
    lambda d: d["lines"][0].update(capacity_mw=0.0),
    lambda d: d["lines"][0].update(susceptance_pu=-1.0),
    lambda d: d["lines"][0].update(to=0),
    lambda d: d["buses"].append({"id": 1, "kind": "load"}),
    lambda d: d["buses"].append({"id": 2, "kind": "load"}),          # disconnected
    lambda d: d["buses"][1].update(kind="substation"),
    lambda d: d.update(loading_limit_fraction=1.2),
    lambda d: d.pop("buses"),
])
def test_invalid_networks(mutate):
    d = two_bus_dict()
    mutate(d)
    with pytest.raises(NetworkError):
        network_from_dict(d)


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(NetworkError):
        load_network(p)


def test_round_trip(sample_network, tmp_path):
    write_network(sample_network, tmp_path / "n.json")
    assert load_network(tmp_path / "n.json") == sample_network


def test_meshed_network_is_valid_but_not_radial():
    d = two_bus_dict()
    d["buses"].append({"id": 2, "kind": "load"})
    d["lines"] += [{"id": 1, "from": 1, "to": 2, "susceptance_pu": 5, "capacity_mw": 1},
                   {"id": 2, "from": 0, "to": 2, "susceptance_pu": 5, "capacity_mw": 1}]
    net = network_from_dict(d)
    assert not net.is_radial()
    with pytest.raises(NetworkError):
        radial_flows(net, {1: np.ones(3)})


def test_overload_strict_boundary(two_bus):
    assert overloaded_lines(two_bus, {0: np.array([0.2, 0.95, 0.3])}) == {0}
    assert overloaded_lines(two_bus, {0: np.array([0.2, 0.9, -0.9])}) == set()
    assert overloaded_lines(two_bus, {0: np.array([-0.95])}) == {0}


def test_missing_flow_series(sample_network):
    with pytest.raises(NetworkError):
        overloaded_lines(sample_network, {0: np.zeros(3)})


@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8), st.floats(1.0, 5.0))
def test_overload_monotone_in_scaling(peaks, alpha):
    net = load_network_cached()
    flows = {ln.id: np.array([0.0, peaks[k]]) for k, ln in enumerate(net.lines)}
    scaled = {k: alpha * v for k, v in flows.items()}
    assert overloaded_lines(net, flows) <= overloaded_lines(net, scaled)


_CACHE = {}


def load_network_cached():
    if "n" not in _CACHE:
        from gridnwa.demand import DATA_DIR
        _CACHE["n"] = load_network(DATA_DIR / "sample_feeder.json")
    return _CACHE["n"]


def test_with_line_capacity_adds_rating(sample_network):
    up = sample_network.with_line_capacity({0: 0.5})
    assert up.line(0).capacity_mw == pytest.approx(1.5)
    assert up.line(1).capacity_mw == sample_network.line(1).capacity_mw


def test_mid_growth_2030_flows_overload(sample_network, base_demand):
    """Unconstrained-upgrade dispatch at 2030 mid growth; per-line maxima recomputed by hand."""
    demand, horizon = representative_weeks(base_demand.scaled(MID_2030), 4)
    opts = DispatchOptions(allow_storage=False, allow_upgrades=True, allow_nonserved=False)
    design = optimize_design(sample_network, None, demand, CostBook(), opts, horizon)
    flows = design.dispatch["flow_mw"]
    per_line = {ln.id: flows[:, k] for k, ln in enumerate(sample_network.lines)}
    got = overloaded_lines(sample_network, per_line)
    assert got

    # independent oracle: in a radial feeder the flow into a bus is the load of its subtree
    children = {}
    for ln in sample_network.lines:
        children.setdefault(ln.from_bus, []).append(ln)

    def subtree(bus):
        tot = demand.bus(bus).copy() if bus in demand.bus_ids else np.zeros(demand.hours)
        for ln in children.get(bus, []):
            tot += subtree(ln.to_bus)
        return tot

    expected = {ln.id for ln in sample_network.lines
                if subtree(ln.to_bus).max() > sample_network.line_limit_mw(ln) + 1e-9}
    assert got == expected
    assert design.line_upgrades and set(design.line_upgrades) <= expected
