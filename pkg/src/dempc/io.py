"""Case files (YAML), profile tables (CSV) and run manifests.

Quantities are per-unit inside the package; profile files are in kW, kVAr and
$ per kWh and are converted on load. Case files carry impedances and bounds
in per-unit on the case's own MVA base.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, fields, is_dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .aladin import AladinConfig, Partition
from .cases import Case, day_profile, lebanon_case, lebanon_day
from .empc import HorizonConfig
from .errors import InputError, StructuralError
from .grid import (Branch, Bus, DeviceFleet, FlexLoad, Generator, Load, Network, StochasticGen,
                   validate_network)
from .profiles import DayProfile

PROFILE_KINDS = ("p_ds", "q_ds", "p_gs", "p_dc", "q_dc", "price")
# which fleet list each series kind is keyed by
_KIND_DEVICES = {"p_ds": "ds", "q_ds": "ds", "p_gs": "gs", "p_dc": "dc", "q_dc": "dc", "price": "dc"}
DAY_START = datetime(2024, 7, 1)
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M"

_HEADER = """\
# Synthetic 13-bus feeder, Lebanon-style. Per-unit on base_mva.
# The second dispatchable generator (G_dg, bus 9) is an addition: it gives
# area 2 its own generation so the distributed solve has something to share.
"""

_DEVICE_TYPES = {"gc": Generator, "gs": StochasticGen, "ds": Load, "dc": FlexLoad}


# ---------------------------------------------------------------------------
# case files
# ---------------------------------------------------------------------------

def _num(v):
    """Plain floats for YAML; infinities become the strings 'inf' / '-inf'."""
    v = float(v)
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def case_to_dict(case: Case) -> dict:
    net = case.network
    buses = [{"id": b.id, "v_min": _num(b.v_min), "v_max": _num(b.v_max), "x_min": _num(b.x_min),
              "x_max": _num(b.x_max), "is_reference": bool(b.is_reference)} for b in net.buses]
    branches = [{"from": br.from_bus, "to": br.to_bus, "r": _num(br.r), "x": _num(br.x), "b": _num(br.b)}
                for br in net.branches]
    fleet = {}
    for kind, cls in _DEVICE_TYPES.items():
        fleet[kind] = [{f.name: (_num(getattr(d, f.name)) if isinstance(getattr(d, f.name), float)
                                 else getattr(d, f.name)) for f in fields(cls)}
                       for d in getattr(case.fleet, kind)]
    return {
        "network": {"base_mva": _num(net.base_mva), "buses": buses, "branches": branches},
        "fleet": fleet,
        "partition": {"areas": [list(a) for a in case.partition.areas]},
        "empc": {"T": case.horizon.steps, "dt": _num(case.horizon.dt),
                 "x0": [_num(v) for v in case.x0], "q_vg_mode": case.q_vg_mode,
                 "vg_utility": case.vg_utility},
        "aladin": {k: (_num(v) if isinstance(v, float) else v) for k, v in asdict(case.aladin).items()},
        "notes": case.notes,
    }


def save_case(case: Case, path) -> Path:
    path = Path(path)
    text = yaml.safe_dump(case_to_dict(case), sort_keys=False, default_flow_style=None, width=100)
    path.write_text(_HEADER + text)
    return path


class _Reader:
    """Typed access into a parsed mapping that names the offending field on error."""

    def __init__(self, data, where):
        if not isinstance(data, dict):
            raise InputError(f"{where}: expected a mapping")
        self.data, self.where = data, where

    def get(self, key, kind=float, default=...):
        if key not in self.data:
            if default is ...:
                raise InputError(f"{self.where}: missing field '{key}'")
            return default
        v = self.data[key]
        try:
            if kind is float:
                return float(v)
            if kind is int:
                if isinstance(v, bool) or float(v) != int(v):
                    raise ValueError
                return int(v)
            if kind is bool:
                if not isinstance(v, bool):
                    raise ValueError
                return v
            if kind is str:
                return str(v)
            if kind is list:
                if not isinstance(v, list):
                    raise ValueError
                return v
        except (TypeError, ValueError):
            raise InputError(f"{self.where}.{key}: expected {kind.__name__}, got {v!r}") from None
        raise TypeError(kind)

    def section(self, key):
        if key not in self.data:
            raise InputError(f"{self.where}: missing section '{key}'")
        return _Reader(self.data[key], f"{self.where}.{key}")

    def items(self, key):
        return [_Reader(d, f"{self.where}.{key}[{i}]") for i, d in enumerate(self.get(key, list))]


def _device(r: _Reader, cls):
    kwargs = {}
    for f in fields(cls):
        if f.name not in r.data:
            if f.name == "bus":
                r.get("bus", int)
            continue
        kind = int if f.name == "bus" else str if f.name == "name" else float
        kwargs[f.name] = r.get(f.name, kind)
    unknown = set(r.data) - {f.name for f in fields(cls)}
    if unknown:
        raise InputError(f"{r.where}: unknown fields {sorted(unknown)}")
    return cls(**kwargs)


def case_from_dict(data) -> Case:
    root = _Reader(data, "case")
    n = root.section("network")
    buses = tuple(Bus(b.get("id", int), v_min=b.get("v_min"), v_max=b.get("v_max"),
                      x_min=b.get("x_min"), x_max=b.get("x_max"),
                      is_reference=b.get("is_reference", bool, False)) for b in n.items("buses"))
    branches = tuple(Branch(br.get("from", int), br.get("to", int), r=br.get("r"), x=br.get("x"),
                            b=br.get("b", float, 0.0)) for br in n.items("branches"))
    network = Network(buses, branches, base_mva=n.get("base_mva"))
    fl = root.section("fleet")
    fleet = DeviceFleet(**{kind: tuple(_device(d, cls) for d in fl.items(kind))
                           if kind in fl.data else () for kind, cls in _DEVICE_TYPES.items()})
    diags = validate_network(network, fleet)
    if diags:
        raise StructuralError("; ".join(diags))
    p = root.section("partition")
    areas = [[int(b) for b in a] for a in p.get("areas", list)]
    partition = Partition.from_areas(network, areas)
    partition.validate(network)
    e = root.section("empc")
    x0 = np.array([float(v) for v in e.get("x0", list)]) if "x0" in e.data else None
    if x0 is not None and x0.shape != (network.n_bus,):
        raise InputError(f"case.empc.x0: expected {network.n_bus} entries, got {x0.size}")
    horizon = HorizonConfig(steps=e.get("T", int, 5), dt=e.get("dt", float, 1.0 / 12.0))
    al = root.section("aladin") if "aladin" in root.data else _Reader({}, "case.aladin")
    defaults = AladinConfig()
    kw = {}
    for f in fields(AladinConfig):
        if f.name in al.data:
            kw[f.name] = al.get(f.name, type(getattr(defaults, f.name)))
    unknown = set(al.data) - {f.name for f in fields(AladinConfig)}
    if unknown:
        raise InputError(f"case.aladin: unknown fields {sorted(unknown)}")
    return Case(network=network, fleet=fleet, partition=partition, horizon=horizon, x0=x0,
                aladin=AladinConfig(**kw), q_vg_mode=e.get("q_vg_mode", str, "tied"),
                vg_utility=e.get("vg_utility", str, "quadratic"),
                notes=root.get("notes", str, ""))


def load_case(path) -> Case:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"case file {path} not found")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise InputError(f"{path}: {exc}") from None
    return case_from_dict(data)


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

def _device_names(case: Case, kind: str) -> list[str]:
    devs = getattr(case.fleet, _KIND_DEVICES[kind])
    return [d.name or f"{_KIND_DEVICES[kind]}{i}" for i, d in enumerate(devs)]


def save_profiles(kw: dict, case: Case, path, interval_minutes: int = 5) -> Path:
    """Long-format table: one row per timestamp, device and series kind."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "device", "kind", "value"])
        for kind in PROFILE_KINDS:
            names = _device_names(case, kind)
            arr = np.asarray(kw[kind], dtype=float)
            for d, name in enumerate(names):
                for t in range(arr.shape[0]):
                    ts = (DAY_START + timedelta(minutes=interval_minutes * t)).strftime(TIMESTAMP_FORMAT)
                    w.writerow([ts, name, kind, repr(float(arr[t, d]))])
    return path


def read_profiles(path, case: Case) -> tuple[dict, int]:
    """Parse a profile table into kW arrays ``(T, n_device)`` and the interval length in minutes."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"profile file {path} not found")
    series = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"timestamp", "device", "kind", "value"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise InputError(f"{path}: header must contain {sorted(need)}")
        for line, row in enumerate(reader, start=2):
            kind = row["kind"]
            if kind not in PROFILE_KINDS:
                raise InputError(f"{path}:{line}: unknown series kind {kind!r}")
            try:
                ts = datetime.strptime(row["timestamp"], TIMESTAMP_FORMAT)
                value = float(row["value"])
            except ValueError as exc:
                raise InputError(f"{path}:{line}: {exc}") from None
            series.setdefault((kind, row["device"]), []).append((ts, value))
    kw = {}
    step = None
    n_t = None
    for kind in PROFILE_KINDS:
        cols = []
        for name in _device_names(case, kind):
            rows = series.pop((kind, name), None)
            if rows is None:
                raise InputError(f"{path}: no {kind} series for device {name!r}")
            rows.sort()
            stamps = [r[0] for r in rows]
            gaps = {b - a for a, b in zip(stamps, stamps[1:])}
            if len(gaps) > 1 or (step is not None and gaps and gaps != {step}):
                raise InputError(f"{path}: {kind}/{name} is not on a uniform grid")
            if gaps:
                step = gaps.pop()
            if n_t is not None and len(rows) != n_t:
                raise InputError(f"{path}: {kind}/{name} has {len(rows)} rows, expected {n_t}")
            n_t = len(rows)
            cols.append([r[1] for r in rows])
        kw[kind] = np.array(cols, dtype=float).T.reshape(n_t or 0, len(cols))
    if series:
        extra = sorted(f"{k}/{d}" for k, d in series)
        raise InputError(f"{path}: series for unknown devices {extra}")
    minutes = 5 if step is None else int(step.total_seconds() // 60)
    return kw, minutes


def load_profiles(path, case: Case, noise: float = 0.0, seed: int = 0) -> tuple[DayProfile, dict]:
    """Per-unit day profile; ``noise`` perturbs the forecast, the realized series stays as read."""
    kw, minutes = read_profiles(path, case)
    if abs(minutes / 60.0 - case.horizon.dt) > 1e-12:
        raise InputError(f"profile interval {minutes} min differs from the case step {case.horizon.dt} h")
    day = day_profile(case, kw, minutes / 60.0)
    return day.with_noise(noise, seed), kw


def generate_lebanon_synthetic(out_dir) -> tuple[Path, Path]:
    """Write the synthetic case and its one-day profile into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    case = lebanon_case()
    _, kw = lebanon_day()
    return save_case(case, out / "case.yaml"), save_profiles(kw, case, out / "profiles.csv")


# ---------------------------------------------------------------------------
# manifests and tables
# ---------------------------------------------------------------------------

def run_manifest(case: Case, **settings) -> dict:
    """Every resolved value that shaped a run, for reconstruction from inputs alone."""
    return {"dempc_version": __version__, "case": case_to_dict(case),
            "settings": settings}


def write_manifest(manifest: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if is_dataclass(o):
        return asdict(o)
    if isinstance(o, Path):
        return str(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, (float, np.floating)) else v for v in row])
    return path
