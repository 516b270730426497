"""Synthetic 13-bus feeder in the style of the Lebanon, NH test system.

The real feeder data are confidential, so this is a stand-in: a radial
12.47 kV layout with seven residential/commercial loads (6000 kW system
peak), two 300 kW solar plants on buses 4 and 6, and a flexible slice of each
load offered as virtual generation. Area 1 holds buses 0-4, area 2 buses 5-12.

Area 2 also gets a small dispatchable generator (bus 9). It is not in the
original description; it gives both areas their own generation so the
distributed solve has something to coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .aladin import AladinConfig, Partition
from .empc import Forecasts, HorizonConfig
from .errors import InputError
from .grid import Branch, Bus, DeviceFleet, FlexLoad, Generator, Load, Network, StochasticGen
from .profiles import INTERVALS_PER_DAY, DayProfile

BASE_MVA = 10.0
PEAK_KW = 6000.0
PV_PEAK_KW = 300.0
LOAD_PF = 0.95

# (from, to, length km) of the radial layout
_LINES = [
    (0, 1, 1.2), (1, 2, 0.9), (2, 3, 0.8), (3, 4, 0.7), (4, 5, 0.8),
    (5, 6, 0.6), (6, 7, 0.7), (7, 8, 0.6), (6, 9, 0.5), (9, 10, 0.6),
    (5, 11, 0.7), (11, 12, 0.6),
]
# per-unit series impedance and charging per km on the 10 MVA / 12.47 kV base
_R_PER_KM = 0.0131
_X_PER_KM = 0.00655
_B_PER_KM = 2.0e-5
# calibrated so day-level losses land inside 4-6% of served energy while the
# evening peak stays above the 0.9 pu voltage floor
IMPEDANCE_SCALE = 5.0
# per-bus storage: roughly a minute of a typical bus load
X_BOUND = 1e-3

# (bus, share of peak, shape mix: 0 residential .. 1 commercial, phase shift h)
_LOADS = [
    (2, 0.12, 0.6, -0.3), (3, 0.14, 0.3, 0.2), (7, 0.16, 0.2, 0.0), (8, 0.14, 0.5, 0.4),
    (10, 0.16, 0.1, -0.2), (11, 0.14, 0.7, 0.1), (12, 0.14, 0.4, -0.4),
]
_PV_BUSES = (4, 6)

# $ per step at 1 pu, derived from $/MWh on a 5-minute step
_STEP_HOURS = 5.0 / 60.0


def _per_step(usd_per_mwh):
    return usd_per_mwh * BASE_MVA * _STEP_HOURS


@dataclass(frozen=True)
class Case:
    network: Network
    fleet: DeviceFleet
    partition: Partition
    horizon: HorizonConfig = HorizonConfig()
    x0: np.ndarray = field(default=None)
    aladin: AladinConfig = AladinConfig()
    q_vg_mode: str = "tied"
    # "quadratic" (see profile_from_kw) or "price_only"
    vg_utility: str = "quadratic"
    notes: str = ""

    def __post_init__(self):
        x0 = np.zeros(self.network.n_bus) if self.x0 is None else np.asarray(self.x0, dtype=float)
        object.__setattr__(self, "x0", x0)


def lebanon_network(impedance_scale: float = IMPEDANCE_SCALE) -> Network:
    buses = [Bus(0, v_min=1.0, v_max=1.05, is_reference=True)]
    buses += [Bus(i, v_min=0.9, v_max=1.1) for i in range(1, 13)]
    buses = [replace(b, x_min=-X_BOUND, x_max=X_BOUND) for b in buses]
    branches = [Branch(f, t, r=impedance_scale * _R_PER_KM * km, x=impedance_scale * _X_PER_KM * km,
                       b=_B_PER_KM * km) for f, t, km in _LINES]
    return Network(tuple(buses), tuple(branches), base_mva=BASE_MVA)


def lebanon_fleet() -> DeviceFleet:
    gc = (
        Generator(bus=0, c2=_per_step(25.0), c1=_per_step(38.0), c0=0.0,
                  p_min=0.0, p_max=1.0, q_min=-0.6, q_max=0.6, r_min=-6.0, r_max=6.0, name="G_sub"),
        Generator(bus=9, c2=_per_step(60.0), c1=_per_step(44.0), c0=0.0,
                  p_min=0.0, p_max=0.15, q_min=-0.1, q_max=0.1, r_min=-1.2, r_max=1.2, name="G_dg"),
    )
    gs = tuple(StochasticGen(bus=b, name=f"PV{i + 1}") for i, b in enumerate(_PV_BUSES))
    ds = tuple(Load(bus=b, name=f"LS{i + 1}") for i, (b, *_) in enumerate(_LOADS))
    dc = tuple(FlexLoad(bus=b, capacity_fraction=0.2, name=f"LC{i + 1}") for i, (b, *_) in enumerate(_LOADS))
    return DeviceFleet(gc=gc, gs=gs, ds=ds, dc=dc)


def lebanon_partition() -> Partition:
    return Partition.from_areas(lebanon_network(), [list(range(0, 5)), list(range(5, 13))])


def lebanon_case(impedance_scale: float = IMPEDANCE_SCALE) -> Case:
    net = lebanon_network(impedance_scale)
    return Case(
        network=net, fleet=lebanon_fleet(),
        partition=Partition.from_areas(net, [list(range(0, 5)), list(range(5, 13))]),
        notes="synthetic stand-in feeder; G_dg on bus 9 is an addition so area 2 owns generation",
    )


def _bump(h, center, width):
    d = (h - center + 12.0) % 24.0 - 12.0
    return np.exp(-0.5 * (d / width) ** 2)


def _load_shape(h, mix, shift):
    t = h - shift
    residential = 0.45 + 0.30 * _bump(t, 7.5, 1.3) + 0.55 * _bump(t, 19.0, 2.2) + 0.10 * _bump(t, 13.0, 3.0)
    commercial = 0.40 + 0.55 * (_bump(t, 12.5, 3.2)) + 0.10 * _bump(t, 9.0, 1.0)
    return (1 - mix) * residential + mix * commercial


def solar_shape(h):
    s = np.sin(np.pi * (h - 6.0) / 12.0)
    return np.where((h > 6.0) & (h < 18.0), np.clip(s, 0.0, None) ** 1.5, 0.0)


def lmp_profile(h):
    """Synthetic day-ahead style price, $/kWh, morning and evening peaks."""
    return 0.040 + 0.018 * _bump(h, 8.0, 1.5) + 0.035 * _bump(h, 18.5, 2.0) - 0.008 * _bump(h, 3.5, 2.5)


def lebanon_day(n_intervals: int = INTERVALS_PER_DAY) -> tuple[DayProfile, dict]:
    """Forecast (= realized) day profile plus the same series in kW / kVAr / $ per kWh."""
    h = np.arange(n_intervals) * (24.0 / INTERVALS_PER_DAY)
    shapes = np.stack([share * _load_shape(h, mix, shift) for _, share, mix, shift in _LOADS], axis=1)
    peak = shapes.sum(axis=1).max()
    p_ds_kw = shapes * (PEAK_KW / peak)
    q_ds_kw = p_ds_kw * np.tan(np.arccos(LOAD_PF))
    p_gs_kw = np.stack([PV_PEAK_KW * solar_shape(h) for _ in _PV_BUSES], axis=1)
    price = np.repeat(lmp_profile(h)[:, None], len(_LOADS), axis=1)
    kw = {"p_ds": p_ds_kw, "q_ds": q_ds_kw, "p_gs": p_gs_kw,
          "p_dc": p_ds_kw.copy(), "q_dc": q_ds_kw.copy(), "price": price}
    return profile_from_kw(kw, BASE_MVA, _STEP_HOURS, capacity_fraction=0.2), kw


def day_profile(case: Case, kw: dict, step_hours: float = _STEP_HOURS) -> DayProfile:
    """Per-unit profile for ``case`` using its virtual-generation utility mode."""
    frac = None
    if case.vg_utility == "quadratic":
        frac = np.array([d.capacity_fraction for d in case.fleet.dc])
    elif case.vg_utility != "price_only":
        raise InputError(f"unknown vg_utility {case.vg_utility!r}")
    return profile_from_kw(kw, case.network.base_mva, step_hours, capacity_fraction=frac)


def profile_from_kw(kw: dict, base_mva: float, step_hours: float,
                    capacity_fraction: float | None = None) -> DayProfile:
    """Per-unit day profile from kW series.

    With ``capacity_fraction`` the curtailment disutility is quadratic, its
    marginal rising from the price at zero curtailment to twice the price at
    full virtual-generation capacity. Without it the utility is price-only.
    """
    base_kw = base_mva * 1000.0
    args = (kw["p_ds"] / base_kw, kw["q_ds"] / base_kw, kw["p_gs"] / base_kw,
            kw["p_dc"] / base_kw, kw["q_dc"] / base_kw)
    price = kw["price"] * base_kw * step_hours
    if capacity_fraction is None:
        fc = Forecasts.price_only(*args, price=price)
    else:
        cap = capacity_fraction * args[3]
        a = np.where(cap > 0, price / (2.0 * np.where(cap > 0, cap, 1.0)), 0.0)
        fc = Forecasts(*args, dc_a=a, dc_b=price, dc_c=np.zeros_like(price))
    return DayProfile(fc, fc, int(round(step_hours * 60)))
