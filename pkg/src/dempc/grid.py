"""Per-unit network and device fleet.

All electrical quantities are per-unit on ``Network.base_mva``. Branches use
the pi-model without transformers: series impedance plus total line charging
split half per end.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InputError, StructuralError

DEFAULT_BASE_MVA = 10.0
DEFAULT_X_BOUND = 0.01


@dataclass(frozen=True)
class Bus:
    id: int
    v_min: float = 0.9
    v_max: float = 1.1
    x_min: float = -DEFAULT_X_BOUND
    x_max: float = DEFAULT_X_BOUND
    is_reference: bool = False


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0

    @property
    def series_admittance(self) -> complex:
        z = complex(self.r, self.x)
        if z == 0:
            raise InputError(f"branch {self.from_bus}-{self.to_bus} has zero impedance")
        return 1.0 / z


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...] = ()
    base_mva: float = DEFAULT_BASE_MVA

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def reference(self) -> int:
        refs = [b.id for b in self.buses if b.is_reference]
        if len(refs) != 1:
            raise StructuralError(f"expected exactly one reference bus, found {len(refs)}")
        return refs[0]

    @cached_property
    def admittance(self) -> np.ndarray:
        return build_admittance(self)

    def bus_array(self, name: str) -> np.ndarray:
        return np.array([getattr(b, name) for b in self.buses], dtype=float)

    def is_connected(self) -> bool:
        return _n_components(self.n_bus, self.branches) <= 1


@dataclass(frozen=True)
class Generator:
    """Controllable generator. Costs are $ per step with power in pu."""
    bus: int
    c2: float = 0.0
    c1: float = 0.0
    c0: float = 0.0
    p_min: float = 0.0
    p_max: float = 1.0
    q_min: float = -1.0
    q_max: float = 1.0
    r_min: float = -np.inf
    r_max: float = np.inf
    name: str = ""


@dataclass(frozen=True)
class StochasticGen:
    bus: int
    name: str = ""


@dataclass(frozen=True)
class Load:
    bus: int
    name: str = ""


@dataclass(frozen=True)
class FlexLoad:
    """Controllable demand offered as virtual generation."""
    bus: int
    capacity_fraction: float = 0.2
    name: str = ""


@dataclass(frozen=True)
class DeviceFleet:
    gc: tuple[Generator, ...] = ()
    gs: tuple[StochasticGen, ...] = ()
    ds: tuple[Load, ...] = ()
    dc: tuple[FlexLoad, ...] = ()

    def __post_init__(self):
        for name in ("gc", "gs", "ds", "dc"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def gc_array(self, name: str) -> np.ndarray:
        return np.array([getattr(g, name) for g in self.gc], dtype=float)


@dataclass(frozen=True)
class Incidence:
    """Device-to-bus 0/1 matrices, each ``n_bus x n_device``."""
    gc: np.ndarray
    gs: np.ndarray
    ds: np.ndarray
    dc: np.ndarray


def _n_components(n_bus, branches):
    if n_bus == 0:
        return 0
    rows = [br.from_bus for br in branches]
    cols = [br.to_bus for br in branches]
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_bus, n_bus))
    n, _ = connected_components(graph, directed=False)
    return n


def build_admittance(network: Network, require_connected: bool = True) -> np.ndarray:
    """Dense complex bus admittance matrix.

    Off-diagonals hold minus the series admittance of the branches joining the
    pair; each diagonal holds the incident series admittances plus half of each
    incident branch's charging susceptance.
    """
    n = network.n_bus
    Y = np.zeros((n, n), dtype=complex)
    for br in network.branches:
        if not (0 <= br.from_bus < n and 0 <= br.to_bus < n):
            raise InputError(f"branch {br.from_bus}-{br.to_bus} references a missing bus")
        if br.from_bus == br.to_bus:
            raise InputError(f"branch {br.from_bus}-{br.to_bus} is a self loop")
        ys = br.series_admittance
        sh = 0.5j * br.b
        f, t = br.from_bus, br.to_bus
        Y[f, f] += ys + sh
        Y[t, t] += ys + sh
        Y[f, t] -= ys
        Y[t, f] -= ys
    if require_connected and _n_components(n, network.branches) > 1:
        raise StructuralError("network graph is disconnected")
    return Y


def branch_admittance(br: Branch) -> np.ndarray:
    """2x2 admittance of a lone branch; row 0 of its injection is the from-end flow."""
    ys = br.series_admittance
    sh = 0.5j * br.b
    return np.array([[ys + sh, -ys], [-ys, ys + sh]])


def _incidence_matrix(buses, n_bus, kind):
    A = np.zeros((n_bus, len(buses)))
    for d, bus in enumerate(buses):
        if not 0 <= bus < n_bus:
            raise InputError(f"{kind} device {d} references missing bus {bus}")
        A[bus, d] = 1.0
    return A


def build_incidence(fleet: DeviceFleet, network: Network) -> Incidence:
    n = network.n_bus
    return Incidence(
        gc=_incidence_matrix([g.bus for g in fleet.gc], n, "gc"),
        gs=_incidence_matrix([g.bus for g in fleet.gs], n, "gs"),
        ds=_incidence_matrix([d.bus for d in fleet.ds], n, "ds"),
        dc=_incidence_matrix([d.bus for d in fleet.dc], n, "dc"),
    )


def validate_network(network: Network, fleet: DeviceFleet | None = None) -> list[str]:
    """Return one diagnostic string per violated invariant; empty when valid."""
    diags = []
    n = network.n_bus
    ids = [b.id for b in network.buses]
    if ids != list(range(n)):
        diags.append(f"bus ids must be 0..{n - 1} in order, got {ids}")
    for b in network.buses:
        if not 0 < b.v_min <= b.v_max:
            diags.append(f"bus {b.id}: voltage bounds [{b.v_min}, {b.v_max}] invalid")
        if not b.x_min <= 0 <= b.x_max:
            diags.append(f"bus {b.id}: storage bounds [{b.x_min}, {b.x_max}] must bracket 0")
    n_ref = sum(b.is_reference for b in network.buses)
    if n_ref != 1:
        diags.append(f"network has {n_ref} reference buses, expected 1")
    for k, br in enumerate(network.branches):
        tag = f"branch {k} ({br.from_bus}-{br.to_bus})"
        if not (0 <= br.from_bus < n and 0 <= br.to_bus < n):
            diags.append(f"{tag}: references a missing bus")
            continue
        if br.from_bus == br.to_bus:
            diags.append(f"{tag}: from_bus equals to_bus")
        if abs(complex(br.r, br.x)) <= 0:
            diags.append(f"{tag}: zero series impedance")
    if n > 1 and not any("missing bus" in d for d in diags):
        if _n_components(n, network.branches) > 1:
            diags.append("network graph is disconnected")
    if fleet is None:
        return diags
    for kind in ("gc", "gs", "ds", "dc"):
        for d, dev in enumerate(getattr(fleet, kind)):
            if not 0 <= dev.bus < n:
                diags.append(f"{kind} device {d}: references missing bus {dev.bus}")
    for d, g in enumerate(fleet.gc):
        tag = f"gc device {d}"
        if g.p_min > g.p_max:
            diags.append(f"{tag}: p_min > p_max")
        if g.q_min > g.q_max:
            diags.append(f"{tag}: q_min > q_max")
        if not g.r_min <= 0 <= g.r_max:
            diags.append(f"{tag}: ramp bounds must bracket 0")
        if g.c2 < 0:
            diags.append(f"{tag}: c2 must be non-negative")
    for d, dev in enumerate(fleet.dc):
        if not 0 <= dev.capacity_fraction <= 1:
            diags.append(f"dc device {d}: capacity_fraction outside [0, 1]")
    return diags
