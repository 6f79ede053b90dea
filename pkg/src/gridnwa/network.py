"""Distribution network description, validation and line-loading checks."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

BUS_KINDS = ("substation", "load", "junction")


class NetworkError(ValueError):
    """Raised for malformed or invalid network descriptions."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = "load"
    has_load: bool = True
    storage_allowed: bool = False
    name: str = ""


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float  # per unit
    capacity_mw: float
    length_km: float
    upgradable: bool = True


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    rated_capacity_mw: float
    loading_limit_fraction: float = 0.9
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        validate(self)

    @property
    def substation(self) -> Bus:
        return next(b for b in self.buses if b.kind == "substation")

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    @property
    def load_buses(self) -> list[int]:
        return [b.id for b in self.buses if b.has_load]

    @property
    def loading_limit_mw(self) -> float:
        return self.loading_limit_fraction * self.rated_capacity_mw

    def line_limit_mw(self, line: Line) -> float:
        return self.loading_limit_fraction * line.capacity_mw

    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    def line(self, line_id: int) -> Line:
        return next(ln for ln in self.lines if ln.id == line_id)

    @property
    def total_km(self) -> float:
        return float(sum(ln.length_km for ln in self.lines))

    def with_line_capacity(self, added_mw: Mapping[int, float]) -> "Network":
        """Copy with ``added_mw[line_id]`` MW of rated capacity added per line."""
        lines = [Line(**{**asdict(ln), "capacity_mw": ln.capacity_mw + added_mw.get(ln.id, 0.0)})
                 for ln in self.lines]
        return Network(self.buses, lines, self.rated_capacity_mw, self.loading_limit_fraction,
                       self.name)

    def is_radial(self) -> bool:
        return len(self.lines) == len(self.buses) - 1

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "rated_capacity_mw": self.rated_capacity_mw,
            "loading_limit_fraction": self.loading_limit_fraction,
            "buses": [{"id": b.id, "kind": b.kind, "has_load": b.has_load,
                       "storage_allowed": b.storage_allowed, "name": b.name} for b in self.buses],
            "lines": [{"id": ln.id, "from": ln.from_bus, "to": ln.to_bus,
                       "susceptance_pu": ln.susceptance, "capacity_mw": ln.capacity_mw,
                       "length_km": ln.length_km, "upgradable": ln.upgradable}
                      for ln in self.lines],
        }


def validate(net: Network) -> None:
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        raise NetworkError("duplicate bus ids")
    line_ids = [ln.id for ln in net.lines]
    if len(set(line_ids)) != len(line_ids):
        raise NetworkError("duplicate line ids")
    for b in net.buses:
        if b.kind not in BUS_KINDS:
            raise NetworkError(f"bus {b.id}: unknown kind {b.kind!r}")
    subs = [b for b in net.buses if b.kind == "substation"]
    if len(subs) != 1:
        raise NetworkError(f"need exactly one substation bus, found {len(subs)}")
    if not 0 < net.loading_limit_fraction <= 1:
        raise NetworkError("loading_limit_fraction must lie in (0, 1]")
    if not net.rated_capacity_mw > 0:
        raise NetworkError("rated_capacity_mw must be positive")
    idset = set(ids)
    for ln in net.lines:
        if ln.from_bus not in idset or ln.to_bus not in idset:
            raise NetworkError(f"line {ln.id} references an unknown bus")
        if ln.from_bus == ln.to_bus:
            raise NetworkError(f"line {ln.id} is a self-loop")
        if not ln.capacity_mw > 0:
            raise NetworkError(f"line {ln.id}: capacity_mw must be positive")
        if not ln.susceptance > 0:
            raise NetworkError(f"line {ln.id}: susceptance must be positive")
        if ln.length_km < 0:
            raise NetworkError(f"line {ln.id}: negative length")
    if not net.lines:
        raise NetworkError("network has no lines: no substation-load path")
    adj = {i: [] for i in ids}
    for ln in net.lines:
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    seen = {subs[0].id}
    queue = deque(seen)
    while queue:
        for nb in adj[queue.popleft()]:
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    if seen != idset:
        raise NetworkError(f"buses {sorted(idset - seen)} are not reachable from the substation")


def network_from_dict(data: dict) -> Network:
    try:
        buses = [Bus(id=int(b["id"]), kind=b.get("kind", "load"),
                     has_load=bool(b.get("has_load", b.get("kind", "load") == "load")),
                     storage_allowed=bool(b.get("storage_allowed", False)),
                     name=b.get("name", "")) for b in data["buses"]]
        lines = [Line(id=int(ln["id"]), from_bus=int(ln["from"]), to_bus=int(ln["to"]),
                      susceptance=float(ln["susceptance_pu"]), capacity_mw=float(ln["capacity_mw"]),
                      length_km=float(ln.get("length_km", 0.0)),
                      upgradable=bool(ln.get("upgradable", True))) for ln in data["lines"]]
        return Network(buses, lines, float(data["rated_capacity_mw"]),
                       float(data.get("loading_limit_fraction", 0.9)), data.get("name", ""))
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed network description: {exc!r}") from exc


def load_network(path) -> Network:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: not valid JSON ({exc})") from exc
    return network_from_dict(data)


def write_network(net: Network, path) -> None:
    Path(path).write_text(json.dumps(net.to_dict(), indent=2) + "\n")


def overloaded_lines(network: Network, flows: Mapping[int, np.ndarray]) -> set[int]:
    """Lines whose peak |flow| strictly exceeds the loading limit.

    ``flows`` maps line id to an MW series over the horizon.
    """
    out = set()
    for ln in network.lines:
        if ln.id not in flows:
            raise NetworkError(f"no flow series for line {ln.id}")
        peak = float(np.max(np.abs(np.asarray(flows[ln.id], float))))
        if peak > network.line_limit_mw(ln):
            out.add(ln.id)
    return out


def radial_flows(network: Network, injections: Mapping[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Line flows (from -> to positive) of a radial network fed from the substation.

    ``injections`` maps bus id to its net withdrawal series (load minus local
    supply). Meshed networks need the DC power flow in :mod:`gridnwa.dispatch`.
    """
    if not network.is_radial():
        raise NetworkError("radial_flows needs a radial network")
    sub = network.substation.id
    children: dict[int, list[tuple[int, Line]]] = {b: [] for b in network.bus_ids}
    for ln in network.lines:
        children[ln.from_bus].append((ln.to_bus, ln))
        children[ln.to_bus].append((ln.from_bus, ln))
    n_t = len(next(iter(injections.values())))
    flows: dict[int, np.ndarray] = {}

    def downstream(bus, parent):
        total = np.asarray(injections.get(bus, np.zeros(n_t)), float).copy()
        for nb, ln in children[bus]:
            if nb == parent:
                continue
            sub_total = downstream(nb, bus)
            flows[ln.id] = sub_total if ln.from_bus == bus else -sub_total
            total += sub_total
        return total

    downstream(sub, None)
    return flows
