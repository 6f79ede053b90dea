"""Regenerate the bundled stand-in data files under src/gridnwa/data/.

The feeder, its hourly profiles and the city class table are synthetic and
only representative of a Delhi-like 1 MW, three-feeder network. The China
consumption series is a geometric interpolation between rounded anchor values
of the public World Bank per-capita indicator, not the official series.
"""
import json
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "gridnwa" / "data"

FEEDER = {
    "name": "delhi-like sample feeder (stand-in)",
    "rated_capacity_mw": 1.0,
    "loading_limit_fraction": 0.9,
    "buses": [
        {"id": 0, "kind": "substation", "name": "grid infeed"},
        {"id": 1, "kind": "junction", "name": "substation busbar"},
        {"id": 2, "kind": "load", "storage_allowed": True, "name": "residential trunk node"},
        {"id": 3, "kind": "load", "name": "residential"},
        {"id": 4, "kind": "load", "name": "residential tail"},
        {"id": 5, "kind": "load", "name": "commercial"},
        {"id": 6, "kind": "load", "name": "commercial tail"},
        {"id": 7, "kind": "load", "name": "industrial"},
        {"id": 8, "kind": "load", "name": "industrial tail"},
    ],
    "lines": [
        {"id": 0, "from": 0, "to": 1, "susceptance_pu": 40.0, "capacity_mw": 1.0, "length_km": 3.0},
        {"id": 1, "from": 1, "to": 2, "susceptance_pu": 25.0, "capacity_mw": 1.0, "length_km": 1.2},
        {"id": 2, "from": 2, "to": 3, "susceptance_pu": 20.0, "capacity_mw": 1.4, "length_km": 0.9},
        {"id": 3, "from": 3, "to": 4, "susceptance_pu": 15.0, "capacity_mw": 0.8, "length_km": 0.7},
        {"id": 4, "from": 1, "to": 5, "susceptance_pu": 25.0, "capacity_mw": 0.6, "length_km": 1.0},
        {"id": 5, "from": 5, "to": 6, "susceptance_pu": 15.0, "capacity_mw": 0.35, "length_km": 0.8},
        {"id": 6, "from": 1, "to": 7, "susceptance_pu": 25.0, "capacity_mw": 0.5, "length_km": 1.1},
        {"id": 7, "from": 7, "to": 8, "susceptance_pu": 15.0, "capacity_mw": 0.3, "length_km": 0.9},
    ],
}

TWO_BUS = {
    "name": "two-bus test network",
    "rated_capacity_mw": 1.0,
    "loading_limit_fraction": 0.9,
    "buses": [
        {"id": 0, "kind": "substation"},
        {"id": 1, "kind": "load", "storage_allowed": True},
    ],
    "lines": [{"id": 0, "from": 0, "to": 1, "susceptance_pu": 10.0, "capacity_mw": 1.0,
               "length_km": 1.0}],
}

# bus -> (customer class, share of the 2020 coincident peak)
LOADS = {2: ("res", 0.20), 3: ("res", 0.24), 4: ("res", 0.18),
         5: ("com", 0.10), 6: ("com", 0.06), 7: ("ind", 0.08), 8: ("ind", 0.06)}
BASE_PEAK_MW = 0.6  # substation loaded at 60% of 1 MW; mid growth overloads it by 2030


def class_shapes(hours=8760, seed=7):
    rng = np.random.default_rng(seed)
    t = np.arange(hours)
    hod = t % 24
    day = t // 24
    dow = day % 7
    summer = np.exp(-0.5 * ((day - 170) / 55.0) ** 2)  # May-Sep cooling season
    weekday = (dow < 5).astype(float)

    def bump(center, width, power=2):
        d = np.minimum(np.abs(hod - center), 24 - np.abs(hod - center))
        return np.exp(-0.5 * (d / width) ** power)

    res = 0.12 + 0.08 * bump(8, 1.5) + (0.25 + 0.75 * summer) * bump(21.5, 2.6, power=4)
    res += 0.04 * summer * bump(14, 3.0)
    com = 0.25 + (0.35 + 0.20 * summer) * bump(14, 4.0, power=4) * (0.6 + 0.4 * weekday)
    ind = 0.45 + 0.25 * bump(13, 5.0, power=6) * weekday + 0.05 * summer
    shapes = {"res": res, "com": com, "ind": ind}
    for k, v in shapes.items():
        v = v * (1 + 0.03 * rng.standard_normal(hours))
        shapes[k] = v / v.max()
    return shapes


def bus_profiles():
    shapes = class_shapes()
    raw = {bus: share * shapes[cls] for bus, (cls, share) in LOADS.items()}
    total = sum(raw.values())
    scale = BASE_PEAK_MW / total.max()
    return {bus: np.round(v * scale, 6) for bus, v in raw.items()}


# rounded anchors of per-capita electricity use in China (kWh/person)
CHINA_ANCHORS = {1990: 511, 2000: 993, 2010: 2944, 2014: 3927, 2019: 5160}


def china_series():
    years = sorted(CHINA_ANCHORS)
    out = {}
    for y0, y1 in zip(years, years[1:]):
        g = (CHINA_ANCHORS[y1] / CHINA_ANCHORS[y0]) ** (1 / (y1 - y0))
        for k in range(y1 - y0):
            out[y0 + k] = CHINA_ANCHORS[y0] * g ** k
    out[years[-1]] = CHINA_ANCHORS[years[-1]]
    return out


CITY = {
    "note": "synthetic representative-feeder classes; class shares copied across cities",
    # 2030 study year under mid growth; storage must carry low growth over the
    # 10-year deferral window; upgrades costed per MW of added limit
    "study": {
        "growth_factor": round(1.0668 ** 10, 6),
        "window_factor": round(1.0321 ** 10, 6),
        "deferral": 10,
        "horizon": 30,
        "upgrade_costing": "per_mw",
    },
    "classes": [
        {"id": k + 1, "loading_fraction": lf, "share_of_demand": sh, "km_per_gwh": kpg}
        for k, (lf, sh, kpg) in enumerate([
            (0.40, 0.16, 0.70), (0.45, 0.14, 0.68), (0.50, 0.13, 0.66),
            (0.55, 0.12, 0.64), (0.60, 0.11, 0.62), (0.65, 0.10, 0.60),
            (0.70, 0.09, 0.58), (0.75, 0.08, 0.56), (0.80, 0.07, 0.54)])
    ],
    "cities": [
        {"name": "Bengaluru", "demand_twh": 10.0},
        {"name": "Delhi", "demand_twh": 23.0},
        {"name": "Kolkata", "demand_twh": 4.0},
        {"name": "Mumbai", "demand_twh": 15.0},
    ],
}


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "sample_feeder.json").write_text(json.dumps(FEEDER, indent=2) + "\n")
    (DATA / "two_bus.json").write_text(json.dumps(TWO_BUS, indent=2) + "\n")
    prof = bus_profiles()
    buses = sorted(prof)
    with open(DATA / "demand_2020.csv", "w") as fh:
        fh.write("hour," + ",".join(f"bus_{b}_mw" for b in buses) + "\n")
        for h in range(8760):
            fh.write(f"{h}," + ",".join(f"{prof[b][h]:.6f}" for b in buses) + "\n")
    with open(DATA / "china_consumption.csv", "w") as fh:
        fh.write("year,kwh_per_capita\n")
        for y, v in sorted(china_series().items()):
            fh.write(f"{y},{v:.1f}\n")
    (DATA / "city_study.json").write_text(json.dumps(CITY, indent=2) + "\n")


if __name__ == "__main__":
    main()
