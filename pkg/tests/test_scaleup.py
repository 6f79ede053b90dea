import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridnwa.scaleup import (COST_VARIANTS, ClassResult, CityStudy, FeederClass, aggregate_city,
                             cost_sensitivity, dispatch_binding, feeder_features, kmedoids,
                             scale_feeder, sensitivity_table)
from gridnwa.valuation import CostBook, breakeven_storage_cost

RAY_LOW, RAY_HIGH = (116.0, 101.0), (406.0, 353.0)


def fc(cid=1, rep=1000.0, serv=1000.0, km=10.0, lf=0.6):
    return FeederClass(cid, lf, rep, serv, km)


def storage_result(cid=1, kwh=1520.0, kw=380.0, a_st=15_000.0, a_up=20_000.0):
    return ClassResult(cid, "storage_nwa", kw, kwh, a_st, a_up, 2.0, 1.0)


def test_ratio_one_is_identity():
    s = scale_feeder(storage_result(), fc())
    assert (s.storage_mwh, s.storage_mw, s.deferred_km) == (1.52, 0.38, 10.0)
    assert (s.aic_storage, s.aic_upgrade) == (15_000.0, 20_000.0)


def test_ratio_1000_gives_gwh():
    s = scale_feeder(storage_result(), fc(serv=1_000_000.0))
    assert s.storage_mwh * 1e-3 == pytest.approx(1.52)


def test_non_storage_classes_defer_nothing():
    r = ClassResult(1, "traditional_upgrade", aic_upgrade=500.0, upgraded_km=1.0)
    s = scale_feeder(r, fc(serv=3000.0))
    assert s.storage_mwh == 0 and s.deferred_km == 0 and s.aic_upgrade == 1500.0


@pytest.mark.parametrize("kw", [dict(rep=0.0), dict(rep=10.0, serv=5.0), dict(km=0.0), dict(lf=0.0)])
def test_feeder_class_validation(kw):
    with pytest.raises(ValueError):
        fc(**kw)


def test_all_traditional_zero_savings():
    classes = [fc(1), fc(2, serv=2000.0)]
    results = [ClassResult(1, "traditional_upgrade", aic_upgrade=100.0),
               ClassResult(2, "no_action")]
    agg = aggregate_city("X", classes, results)
    assert agg.flexible_budget_usd == agg.traditional_budget_usd == 3000.0
    assert agg.savings == 0.0 and agg.storage_gwh == 0.0 and agg.deferred_km == 0.0


def test_two_class_hand_arithmetic():
    classes = [fc(1, rep=100.0, serv=200.0, km=5.0), fc(2, rep=50.0, serv=150.0, km=7.0)]
    results = [storage_result(1, kwh=1000.0, kw=250.0, a_st=40.0, a_up=100.0),
               ClassResult(2, "traditional_upgrade", aic_upgrade=30.0)]
    agg = aggregate_city("X", classes, results, horizon=30, deferral=10)
    # class 1: ratio 2, storage 80/yr for 10 yrs then upgrade 200/yr for 20; class 2: ratio 3
    flex = 80 * 10 + 200 * 20 + 90 * 30
    trad = 200 * 30 + 90 * 30
    assert agg.flexible_budget_usd == pytest.approx(flex)
    assert agg.traditional_budget_usd == pytest.approx(trad)
    assert agg.savings == pytest.approx(1 - flex / trad)
    assert agg.storage_gwh == pytest.approx(2.0e-3)
    assert agg.deferred_km == 5.0 and agg.serviced_km == 12.0


def test_negative_savings_flagged():
    agg = aggregate_city("X", [fc()], [storage_result(a_st=50_000.0, a_up=10_000.0)])
    assert agg.savings < 0 and agg.nwa_worse


def test_aggregate_validation():
    with pytest.raises(ValueError):
        aggregate_city("X", [fc()], [storage_result()], horizon=10, deferral=20)
    with pytest.raises(ValueError):
        aggregate_city("X", [fc(1), fc(2)], [storage_result(1)])


@given(st.floats(1.0, 1e4))
def test_linearity_in_serviced_demand(alpha):
    base = [fc(1, serv=2000.0), fc(2, rep=500.0, serv=800.0)]
    res = [storage_result(1), storage_result(2, kwh=300.0)]
    a = aggregate_city("X", base, res)
    scaled = [FeederClass(c.id, c.loading_fraction, c.represented_demand_mwh,
                          alpha * c.serviced_demand_mwh, c.serviced_km) for c in base]
    b = aggregate_city("X", scaled, res)
    assert b.storage_gwh == pytest.approx(alpha * a.storage_gwh, rel=1e-12)


def test_city_study_loads(city_study, tmp_path):
    assert len(city_study.classes) == 9
    lfs = [c["loading_fraction"] for c in city_study.classes]
    assert min(lfs) == 0.4 and max(lfs) == 0.8
    bad = tmp_path / "bad.json"
    bad.write_text('{"classes": [{"id": 1, "loading_fraction": 0.5, "share_of_demand": 0.4,'
                   ' "km_per_gwh": 1}], "cities": []}')
    with pytest.raises(ValueError):
        CityStudy.load(bad)


def test_sample_study_totals_match_independent_sum(city_study, class_study, cost_triplet):
    mid = cost_triplet["mid"]
    results = class_study.resolve_all(city_study, CostBook())
    by_id = {r.class_id: r for r in results}
    for city in city_study.cities:
        gwh = km = 0.0
        for c in city_study.classes:
            r = by_id[c["id"]]
            if r.decision != "storage_nwa":
                continue
            serviced = city["demand_twh"] * 1e6 * c["share_of_demand"]
            rep = float(class_study.profile(c["loading_fraction"]).mw.sum())
            gwh += r.storage_kwh / 1e6 * serviced / rep
            km += c["km_per_gwh"] * serviced / 1e3
        agg = mid[city["name"]]
        assert agg.storage_gwh == pytest.approx(gwh, rel=1e-12)
        assert agg.deferred_km == pytest.approx(km, rel=1e-12)
        assert agg.deferred_km <= agg.serviced_km
    assert sum(a.storage_gwh for a in mid.values()) > 0


def test_identical_variants_identical_outputs(city_study, class_study):
    res = cost_sensitivity(city_study, class_study, CostBook(),
                           {"a": (168.0, 146.0), "b": (168.0, 146.0)})
    assert sensitivity_table({"x": res["a"]}).drop(columns="variant").equals(
        sensitivity_table({"x": res["b"]}).drop(columns="variant"))


def test_storage_non_increasing_across_triplet(cost_triplet):
    tot = {k: sum(a.storage_gwh for a in v.values()) for k, v in cost_triplet.items()}
    assert tot["low"] >= tot["mid"] >= tot["high"]
    for city in cost_triplet["low"]:
        assert (cost_triplet["low"][city].storage_gwh >= cost_triplet["mid"][city].storage_gwh
                >= cost_triplet["high"][city].storage_gwh)


def test_dispatch_binding_flag(cost_triplet):
    same = all(np.isclose(cost_triplet["low"][c].storage_gwh, cost_triplet["mid"][c].storage_gwh)
               for c in cost_triplet["low"])
    assert dispatch_binding(cost_triplet) == same


def test_breakeven_point_deploys_nothing(city_study, class_study):
    book = CostBook()
    be = breakeven_storage_cost(
        lambda e, p: class_study.max_option_value(city_study, book.with_storage_costs(e, p)),
        RAY_LOW, RAY_HIGH)
    at_be = class_study.run(city_study, book.with_storage_costs(be.energy_usd_per_kwh,
                                                                be.power_usd_per_kw))
    assert sum(a.storage_gwh for a in at_be.values()) == 0.0
    assert all(a.deferred_km == 0 for a in at_be.values())


def test_kmedoids_recovers_separated_clusters():
    rng = np.random.default_rng(0)
    centers = np.array([[0, 0], [10, 0], [0, 10]])
    X = np.vstack([c + rng.normal(scale=0.3, size=(20, 2)) for c in centers])
    med, labels = kmedoids(X, 3, seed=1)
    assert len(set(labels[:20])) == len(set(labels[20:40])) == len(set(labels[40:])) == 1
    assert len(set(labels)) == 3
    np.testing.assert_array_equal(kmedoids(X, 3, seed=1)[0], med)
    with pytest.raises(ValueError):
        kmedoids(X, 0)


def test_feeder_features_shape(base_demand):
    prof = np.vstack([base_demand.total, base_demand.total * 0.5])
    f = feeder_features([0.6, 0.3], prof)
    assert f.shape == (2, 25)
    np.testing.assert_allclose(f[0, 1:], f[1, 1:])
    assert f[:, 1:].max() == pytest.approx(1.0)
