"""Receding-horizon day simulation.

Every interval assembles the EMPC from the forecast window, solves it
(centralized, distributed, or both on the same instance), applies the first
step and integrates the bus energy state with the realized disturbances.
In ``both`` mode the plant follows the centralized solution, so the two
solvers always see identical instances and their objectives are comparable.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .aladin import AladinConfig, Partition, aladin_solve, partition_problem
from .empc import EmpcProblem, Forecasts, HorizonConfig, assemble_empc
from .errors import InputError, SolverError
from .grid import DeviceFleet, Network, build_incidence
from .nlp import IpmOptions, solve_nlp
from .profiles import DayProfile

log = logging.getLogger(__name__)

MODES = ("centralized", "distributed", "both")


@dataclass
class StepReport:
    """What one interval produced; arrays are per device or per bus."""
    t: int
    p_gc: np.ndarray
    q_gc: np.ndarray
    p_vg: np.ndarray
    q_vg: np.ndarray
    vm: np.ndarray
    va: np.ndarray
    x: np.ndarray
    imbalance: np.ndarray
    loss: float
    objective_cent: float = np.nan
    objective_dist: float = np.nan
    p_gc_dist: np.ndarray | None = None
    nlp_iterations: int = 0
    aladin_iterations: int = 0
    consensus_residual: float = np.nan
    boundary: dict = field(default_factory=dict)
    status: str = "ok"
    runtime_cent: float = 0.0
    runtime_dist: float = 0.0


@dataclass
class SimResult:
    mode: str
    steps: list
    x0: np.ndarray
    dt: float
    gc_names: tuple
    dc_names: tuple
    energy: dict

    TABLE_COLUMNS = ("t", "status", "objective_cent", "objective_dist", "deviation_pct",
                     "nlp_iterations", "aladin_iterations", "consensus_residual", "loss")

    @property
    def n_intervals(self) -> int:
        return len(self.steps)

    def series(self, name) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.steps])

    def table(self, sep: str = ",") -> str:
        """One row per interval. Runtimes are left out so reruns compare byte for byte."""
        head = list(self.TABLE_COLUMNS)
        head += [f"p_gc_{n}" for n in self.gc_names] + [f"p_vg_{n}" for n in self.dc_names]
        head += [f"p_gc_dist_{n}" for n in self.gc_names] + [f"x_{b}" for b in range(self.x0.size)]
        lines = [sep.join(head)]
        dev = cost_deviation_pct(self.series("objective_cent"), self.series("objective_dist"))
        for s, d in zip(self.steps, dev):
            pd = s.p_gc_dist if s.p_gc_dist is not None else np.full(s.p_gc.size, np.nan)
            row = [str(s.t), s.status, _fmt(s.objective_cent), _fmt(s.objective_dist), _fmt(d),
                   str(s.nlp_iterations), str(s.aladin_iterations), _fmt(s.consensus_residual),
                   _fmt(s.loss)]
            row += [_fmt(v) for v in np.concatenate([s.p_gc, s.p_vg, pd, s.x])]
            lines.append(sep.join(row))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return f"{float(v):.12g}"


# ---------------------------------------------------------------------------
# state integration
# ---------------------------------------------------------------------------

def integrate_state(x, network: Network, fleet: DeviceFleet, p_gc, p_vg, vm, va,
                    p_gs, p_ds, dt: float):
    """Advance the bus energy state one interval.

    Returns ``(x_next, imbalance)``: the state clamped into its bounds and the
    energy removed by clamping (unclamped minus clamped), both per bus.
    """
    x = np.asarray(x, dtype=float)
    n = network.n_bus
    if x.shape != (n,) or np.shape(vm) != (n,) or np.shape(va) != (n,):
        raise InputError("state and voltage vectors must have one entry per bus")
    inc = build_incidence(fleet, network)
    Y = network.admittance
    p_inj, _ = kernels.injections(np.asarray(vm, float), np.asarray(va, float),
                                  np.ascontiguousarray(Y.real), np.ascontiguousarray(Y.imag))
    net_p = inc.gc @ p_gc + inc.gs @ p_gs + inc.dc @ p_vg - inc.ds @ p_ds - p_inj
    raw = x + dt * net_p
    clamped = np.clip(raw, network.bus_array("x_min"), network.bus_array("x_max"))
    return clamped, raw - clamped


def shift_solution(problem: EmpcProblem, z) -> np.ndarray:
    """Drop step 0 and repeat the last step: the next interval's warm start."""
    z = np.asarray(z, dtype=float)
    m = problem.layout.per_step
    return np.concatenate([z[m:], z[-m:]])


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    horizon: HorizonConfig = HorizonConfig()
    aladin: AladinConfig = AladinConfig()
    nlp_tol: float = 1e-8
    nlp_max_iter: int = 200
    q_vg_mode: str = "tied"
    warm_start: bool = True


def _solve_centralized(P: EmpcProblem, start, cfg: SimConfig):
    """Warm start first (with a short barrier schedule), flat start as fallback."""
    attempts = []
    if start is not None:
        attempts.append((start, IpmOptions(mu_init=1e-3, bound_push=1e-6)))
    attempts.append((P.flat_start(), None))
    iters = 0
    kkt = None
    for x0, opts in attempts:
        kkt = solve_nlp(P.to_nlp(), x0, tol=cfg.nlp_tol, max_iter=cfg.nlp_max_iter, options=opts)
        iters += kkt.iterations
        if kkt.converged:
            break
    return kkt, iters


def run_mpc(network: Network, fleet: DeviceFleet, partition: Partition | None, day: DayProfile,
            mode: str = "centralized", x0=None, config: SimConfig = SimConfig(),
            n_intervals: int | None = None, progress=None) -> SimResult:
    """Simulate ``n_intervals`` (default: the whole day) of receding-horizon control."""
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}, got {mode!r}")
    if mode != "centralized" and partition is None:
        raise InputError("distributed modes need a partition")
    if partition is not None:
        partition.validate(network)
    dt = config.horizon.dt
    if abs(dt - day.dt) > 1e-12:
        raise InputError(f"horizon step {dt} h differs from the profile interval {day.dt} h")
    n = day.n_intervals if n_intervals is None else min(n_intervals, day.n_intervals)
    T = config.horizon.steps
    x = np.zeros(network.n_bus) if x0 is None else np.asarray(x0, dtype=float).copy()
    x_start = x.copy()
    p_prev = None
    held = None
    warm_c = warm_d = None
    steps = []
    realized = day.realized
    n_gc = len(fleet.gc)
    e_gen = e_gs = e_vg = e_ds = e_loss = e_clamp = 0.0
    for t in range(n):
        P = assemble_empc(network, fleet, day.window(t, T), config.horizon, x0=x,
                          p_gc_prev=p_prev, q_vg_mode=config.q_vg_mode)
        rep = {"t": t, "status": "ok"}
        sol_c = sol_d = None
        if mode in ("centralized", "both"):
            t0 = time.perf_counter()
            kkt, iters = _solve_centralized(P, warm_c if config.warm_start else None, config)
            rep["runtime_cent"] = time.perf_counter() - t0
            rep["nlp_iterations"] = iters
            if kkt.converged:
                sol_c = kkt.primal
                rep["objective_cent"] = P.objective(sol_c)
                warm_c = shift_solution(P, sol_c)
            else:
                rep["status"] = "centralized_failed"
                warm_c = None
        if mode in ("distributed", "both"):
            t0 = time.perf_counter()
            try:
                subs = partition_problem(P, partition)
                res = aladin_solve(P, partition, config.aladin,
                                   z_init=warm_d if config.warm_start else None, subs=subs)
                rep["aladin_iterations"] = res.iterations
                rep["consensus_residual"] = res.consensus_residual
                rep["boundary"] = res.boundary_mismatch
                if res.converged:
                    sol_d = res.solution
                    rep["objective_dist"] = res.objective
                    rep["p_gc_dist"] = sol_d[P.layout.idx("pg", 0)].copy()
                    warm_d = shift_solution(P, sol_d)
                else:
                    rep["status"] = _join(rep["status"], "distributed_not_converged")
                    warm_d = None
            except SolverError as exc:
                log.warning("interval %d: %s", t, exc)
                rep["status"] = _join(rep["status"], "distributed_failed")
                warm_d = None
            rep["runtime_dist"] = time.perf_counter() - t0
        applied = sol_c if mode in ("centralized", "both") else sol_d
        if applied is not None:
            u = P.unpack(applied)
            held = {k: u[k][0].copy() for k in ("pg", "qg", "pvg", "qvg", "vm", "va")}
        elif held is None:
            raise SolverError(f"interval {t}: no solution and nothing to hold", iteration=t)
        else:
            log.warning("interval %d: holding the previous dispatch", t)
        k_real = min(t, realized.steps - 1)
        p_gs, p_ds = realized.p_gs[k_real], realized.p_ds[k_real]
        x_next, imb = integrate_state(x, network, fleet, held["pg"], held["pvg"], held["vm"],
                                      held["va"], p_gs, p_ds, dt)
        loss = _losses(network, held["vm"], held["va"])
        e_gen += dt * held["pg"].sum()
        e_gs += dt * p_gs.sum()
        e_vg += dt * held["pvg"].sum()
        e_ds += dt * p_ds.sum()
        e_loss += dt * loss
        e_clamp += imb.sum()
        steps.append(StepReport(p_gc=held["pg"], q_gc=held["qg"], p_vg=held["pvg"], q_vg=held["qvg"],
                                vm=held["vm"], va=held["va"], x=x_next, imbalance=imb, loss=loss, **rep))
        x = x_next
        p_prev = held["pg"][:n_gc].copy()
        if progress is not None:
            progress(steps[-1])
    energy = {"generation": e_gen, "stochastic_generation": e_gs, "virtual_generation": e_vg,
              "demand": e_ds, "losses": e_loss, "clamped": e_clamp,
              "storage_change": float((x - x_start).sum())}
    return SimResult(mode, steps, x_start, dt, tuple(g.name or f"gc{i}" for i, g in enumerate(fleet.gc)),
                     tuple(d.name or f"dc{i}" for i, d in enumerate(fleet.dc)), energy)


def _join(status, extra):
    return extra if status == "ok" else f"{status}+{extra}"


def _losses(network: Network, vm, va) -> float:
    Y = network.admittance
    p, _ = kernels.injections(vm, va, np.ascontiguousarray(Y.real), np.ascontiguousarray(Y.imag))
    return float(p.sum())


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def cost_deviation_pct(j_cent, j_dist) -> np.ndarray:
    """``100 |J_dist - J_cent| / |J_cent|``; where ``J_cent`` is zero the absolute gap is reported."""
    jc = np.atleast_1d(np.asarray(j_cent, dtype=float))
    jd = np.atleast_1d(np.asarray(j_dist, dtype=float))
    gap = np.abs(jd - jc)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(jc != 0, 100.0 * gap / np.abs(jc), gap)


def compute_metrics(result: SimResult) -> dict:
    e = result.energy
    served = e["demand"] - e["virtual_generation"]
    dev = cost_deviation_pct(result.series("objective_cent"), result.series("objective_dist"))
    finite = dev[np.isfinite(dev)]
    out = {
        "cost_deviation_pct": dev,
        "max_deviation_pct": float(finite.max()) if finite.size else np.nan,
        "loss_fraction": e["losses"] / served if served > 0 else np.nan,
        "boundary_mismatch": result.series("consensus_residual"),
        "vg_energy": e["virtual_generation"],
        # generation + stochastic + VG - demand - losses - storage change - clamped energy
        "energy_residual": (e["generation"] + e["stochastic_generation"] + e["virtual_generation"]
                            - e["demand"] - e["losses"] - e["storage_change"] - e["clamped"]),
        "failures": [s.t for s in result.steps if s.status != "ok"],
    }
    dist = [s.p_gc_dist for s in result.steps]
    if all(d is not None for d in dist) and dist:
        cent = result.series("p_gc")
        peak = float(cent.sum(axis=1).max())
        gap = np.abs(np.array(dist) - cent).max(axis=1)
        out["generation_gap_frac_of_peak"] = gap / peak if peak > 0 else gap
    return out
