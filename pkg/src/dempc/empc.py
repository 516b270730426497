"""Multi-period economic MPC formulation of the AC optimal power flow.

Per step ``k`` the decision vector holds::

    [P_GC(k); Q_GC(k); P_VG(k); Q_VG(k); |V|(k); angle(k); x(k+1); aux(k)]

``aux`` is empty for the full-network problem; area sub-problems built by
:meth:`EmpcProblem.restricted` append duplicated neighbour voltages to the
``|V|``/``angle`` blocks and tie-flow auxiliaries to ``aux``.

Equality rows per step are the bus energy-state update, the reactive balance,
the reference angle and (areas only) the tie-flow definitions. Ramp limits and
the virtual-generation power-factor tie are linear rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import InputError
from .grid import Branch, DeviceFleet, Network, branch_admittance, build_incidence
from .nlp import NlpInstance

BLOCKS = ("pg", "qg", "pvg", "qvg", "vm", "va", "x", "aux")
PRICE_REGULARIZER = 1e-4


@dataclass(frozen=True)
class HorizonConfig:
    steps: int = 5
    dt: float = 1.0 / 12.0

    def __post_init__(self):
        if self.steps < 1:
            raise InputError("horizon needs at least one step")
        if not self.dt > 0:
            raise InputError("time step must be positive")


@dataclass(frozen=True)
class Forecasts:
    """Per-step forecasts, each array ``(T, n_device)`` in pu."""
    p_ds: np.ndarray
    q_ds: np.ndarray
    p_gs: np.ndarray
    p_dc: np.ndarray
    q_dc: np.ndarray
    dc_a: np.ndarray
    dc_b: np.ndarray
    dc_c: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("p_ds", "q_ds", "p_gs", "p_dc", "q_dc", "dc_a", "dc_b", "dc_c"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim != 2:
                raise InputError(f"forecast {name} must be 2-d (steps x devices)")
            arrays[name] = a
            object.__setattr__(self, name, a)
        T = arrays["p_ds"].shape[0]
        if any(a.shape[0] != T for a in arrays.values()):
            raise InputError("forecast arrays disagree on the number of steps")
        for name in ("p_ds", "p_gs", "p_dc", "q_dc"):
            if np.any(arrays[name] < 0):
                raise InputError(f"forecast {name} must be non-negative")
        if np.any(arrays["dc_a"] < 0):
            raise InputError("dc_a must be non-negative")

    @property
    def steps(self) -> int:
        return self.p_ds.shape[0]

    @classmethod
    def price_only(cls, p_ds, q_ds, p_gs, p_dc, q_dc, price, regularizer=PRICE_REGULARIZER):
        """Linear utility: ``b`` is the price profile, ``a`` a small regularizer."""
        price = np.asarray(price, dtype=float)
        return cls(p_ds, q_ds, p_gs, p_dc, q_dc,
                   dc_a=np.full_like(price, regularizer), dc_b=price, dc_c=np.zeros_like(price))

    def window(self, start: int, steps: int) -> "Forecasts":
        """Rows ``start .. start+steps-1``, holding the last row past the end."""
        idx = np.minimum(np.arange(start, start + steps), self.steps - 1)
        return Forecasts(*(getattr(self, n)[idx] for n in
                           ("p_ds", "q_ds", "p_gs", "p_dc", "q_dc", "dc_a", "dc_b", "dc_c")))


def generation_cost(p_gc, fleet: DeviceFleet) -> float:
    p = np.atleast_2d(np.asarray(p_gc, dtype=float))
    c2, c1, c0 = fleet.gc_array("c2"), fleet.gc_array("c1"), fleet.gc_array("c0")
    return float(np.sum(c2 * p ** 2 + c1 * p + c0))


def virtual_gen_cost(p_vg, forecasts: Forecasts) -> float:
    p = np.atleast_2d(np.asarray(p_vg, dtype=float))
    T = p.shape[0]
    a, b, c = forecasts.dc_a[:T], forecasts.dc_b[:T], forecasts.dc_c[:T]
    return float(np.sum(a * p ** 2 + b * p + c))


def vg_capacity(forecasts: Forecasts, fleet: DeviceFleet, k: int) -> dict:
    """Virtual-generation limits at step ``k``: a fraction of the flexible-demand forecast."""
    if not 0 <= k < forecasts.steps:
        raise InputError(f"step {k} outside the forecast window")
    frac = np.array([d.capacity_fraction for d in fleet.dc])
    p_max = frac * forecasts.p_dc[k]
    q_max = frac * forecasts.q_dc[k]
    return {"p_vg_min": np.zeros_like(p_max), "p_vg_max": p_max,
            "q_vg_min": np.zeros_like(q_max), "q_vg_max": q_max}


@dataclass(frozen=True)
class Tie:
    """A tie branch as seen from one area.

    ``sign`` is +1 in the area owning the from-bus and -1 in the other, so the
    two areas' auxiliaries are equal and opposite at consensus.
    """
    branch: Branch
    sign: float
    col_from: int
    col_to: int


class Layout:
    """Index bookkeeping for the step-major decision vector."""

    def __init__(self, steps, n_gc, n_dc, n_col, n_own, n_aux):
        self.steps = steps
        self.sizes = {"pg": n_gc, "qg": n_gc, "pvg": n_dc, "qvg": n_dc,
                      "vm": n_col, "va": n_col, "x": n_own, "aux": n_aux}
        self.offsets = {}
        off = 0
        for name in BLOCKS:
            self.offsets[name] = off
            off += self.sizes[name]
        self.per_step = off
        self.n = off * steps

    def idx(self, name, k) -> np.ndarray:
        start = k * self.per_step + self.offsets[name]
        return np.arange(start, start + self.sizes[name])

    def all(self, name) -> np.ndarray:
        return np.concatenate([self.idx(name, k) for k in range(self.steps)])


@dataclass
class EmpcProblem:
    """Self-describing NLP for one horizon.

    Built by :func:`assemble_empc`; immutable in use.
    """
    network: Network
    fleet: DeviceFleet
    forecasts: Forecasts
    horizon: HorizonConfig
    x0: np.ndarray
    p_gc_prev: np.ndarray | None
    own_buses: np.ndarray
    col_buses: np.ndarray
    gens: np.ndarray
    dcs: np.ndarray
    ties: tuple = ()
    ref_col: int | None = None
    q_vg_mode: str = "tied"
    layout: Layout = field(init=False)

    def __post_init__(self):
        net, fleet = self.network, self.fleet
        T = self.horizon.steps
        if self.forecasts.steps < T:
            raise InputError("forecasts shorter than the horizon")
        if self.q_vg_mode not in ("tied", "free"):
            raise InputError(f"unknown q_vg_mode {self.q_vg_mode!r}")
        self.own_buses = np.asarray(self.own_buses, dtype=int)
        self.col_buses = np.asarray(self.col_buses, dtype=int)
        self.gens = np.asarray(self.gens, dtype=int)
        self.dcs = np.asarray(self.dcs, dtype=int)
        n_own = self.own_buses.size
        n_col = self.col_buses.size
        if not np.array_equal(self.col_buses[:n_own], self.own_buses):
            raise InputError("column buses must start with the owned buses")
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (n_own,):
            raise InputError(f"x0 must have {n_own} entries")
        xlo = net.bus_array("x_min")[self.own_buses]
        xhi = net.bus_array("x_max")[self.own_buses]
        if np.any(x0 < xlo - 1e-12) or np.any(x0 > xhi + 1e-12):
            raise InputError("x0 outside the storage bounds")
        self.x0 = x0
        if self.p_gc_prev is not None:
            self.p_gc_prev = np.asarray(self.p_gc_prev, dtype=float)
            if self.p_gc_prev.shape != (self.gens.size,):
                raise InputError("p_gc_prev has the wrong length")
        self.layout = Layout(T, self.gens.size, self.dcs.size, n_col, n_own, 2 * len(self.ties))

        Y = net.admittance[np.ix_(self.col_buses, self.col_buses)]
        self._G = np.ascontiguousarray(Y.real)
        self._B = np.ascontiguousarray(Y.imag)
        self._tie_G = []
        self._tie_B = []
        for tie in self.ties:
            Yb = branch_admittance(tie.branch)
            self._tie_G.append(np.ascontiguousarray(Yb.real))
            self._tie_B.append(np.ascontiguousarray(Yb.imag))

        inc = build_incidence(fleet, net)
        own = self.own_buses
        self._A_gc = inc.gc[np.ix_(own, self.gens)]
        self._A_dc = inc.dc[np.ix_(own, self.dcs)]
        fc = self.forecasts
        self._d_p = (inc.gs[own] @ fc.p_gs[:T].T - inc.ds[own] @ fc.p_ds[:T].T).T
        self._d_q = (-inc.ds[own] @ fc.q_ds[:T].T).T
        self._c2 = fleet.gc_array("c2")[self.gens]
        self._c1 = fleet.gc_array("c1")[self.gens]
        self._c0 = fleet.gc_array("c0")[self.gens]
        self._a = fc.dc_a[:T][:, self.dcs]
        self._b = fc.dc_b[:T][:, self.dcs]
        self._c = fc.dc_c[:T][:, self.dcs]
        self.n_eq_step = 2 * n_own + (1 if self.ref_col is not None else 0) + 2 * len(self.ties)
        self.n_eq = T * self.n_eq_step
        self._build_bounds()
        self._build_linear_rows()
        self._obj_hess = self._objective_hessian()

    # -- structure ---------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return self.layout.n

    @property
    def n_own(self) -> int:
        return self.own_buses.size

    @property
    def n_col(self) -> int:
        return self.col_buses.size

    def _build_bounds(self):
        L, T = self.layout, self.horizon.steps
        fleet, net = self.fleet, self.network
        lo = np.full(L.n, -np.inf)
        hi = np.full(L.n, np.inf)
        gens = [fleet.gc[g] for g in self.gens]
        frac = np.array([fleet.dc[d].capacity_fraction for d in self.dcs])
        # duplicated neighbour voltages are bounded by their owner only, so a
        # limit never appears twice in the coordinator's active set
        n_own = self.own_buses.size
        vmin = np.full(self.col_buses.size, -np.inf)
        vmax = np.full(self.col_buses.size, np.inf)
        vmin[:n_own] = net.bus_array("v_min")[self.own_buses]
        vmax[:n_own] = net.bus_array("v_max")[self.own_buses]
        xmin = net.bus_array("x_min")[self.own_buses]
        xmax = net.bus_array("x_max")[self.own_buses]
        for k in range(T):
            lo[L.idx("pg", k)] = [g.p_min for g in gens]
            hi[L.idx("pg", k)] = [g.p_max for g in gens]
            lo[L.idx("qg", k)] = [g.q_min for g in gens]
            hi[L.idx("qg", k)] = [g.q_max for g in gens]
            lo[L.idx("pvg", k)] = 0.0
            hi[L.idx("pvg", k)] = frac * self.forecasts.p_dc[k, self.dcs]
            lo[L.idx("qvg", k)] = 0.0
            hi[L.idx("qvg", k)] = frac * self.forecasts.q_dc[k, self.dcs]
            lo[L.idx("vm", k)] = vmin
            hi[L.idx("vm", k)] = vmax
            lo[L.idx("x", k)] = xmin
            hi[L.idx("x", k)] = xmax
        self.lower = lo
        self.upper = hi

    def _build_linear_rows(self):
        L, T, dt = self.layout, self.horizon.steps, self.horizon.dt
        rows, lo, hi, kinds = [], [], [], []
        if self.q_vg_mode == "tied":
            pdc = self.forecasts.p_dc[:T][:, self.dcs]
            qdc = self.forecasts.q_dc[:T][:, self.dcs]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(pdc > 0, qdc / np.where(pdc > 0, pdc, 1.0), 0.0)
            for k in range(T):
                for j, (ip, iq) in enumerate(zip(L.idx("pvg", k), L.idx("qvg", k))):
                    r = np.zeros(L.n)
                    r[iq] = 1.0
                    r[ip] = -ratio[k, j]
                    rows.append(r)
                    lo.append(0.0)
                    hi.append(0.0)
                    kinds.append(("pf_tie", k, j))
        for j, g in enumerate(self.gens):
            gen = self.fleet.gc[g]
            rlo, rhi = dt * gen.r_min, dt * gen.r_max
            if not (np.isfinite(rlo) or np.isfinite(rhi)):
                continue
            for k in range(T):
                r = np.zeros(L.n)
                r[L.idx("pg", k)[j]] = 1.0
                if k == 0:
                    if self.p_gc_prev is None:
                        continue
                    base = self.p_gc_prev[j]
                else:
                    r[L.idx("pg", k - 1)[j]] = -1.0
                    base = 0.0
                rows.append(r)
                lo.append(base + rlo)
                hi.append(base + rhi)
                kinds.append(("ramp", k, j))
        self.lin_rows = np.array(rows) if rows else np.zeros((0, L.n))
        self.lin_lower = np.array(lo, dtype=float)
        self.lin_upper = np.array(hi, dtype=float)
        self.lin_kinds = kinds

    # -- points ------------------------------------------------------------

    def unpack(self, z) -> dict:
        """Split a decision vector into ``(T, size)`` arrays per block."""
        z = np.asarray(z, dtype=float)
        L = self.layout
        return {name: np.stack([z[L.idx(name, k)] for k in range(L.steps)]) for name in BLOCKS}

    def pack(self, parts: dict) -> np.ndarray:
        z = np.zeros(self.layout.n)
        for name in BLOCKS:
            if name in parts:
                for k in range(self.layout.steps):
                    z[self.layout.idx(name, k)] = parts[name][k]
        return z

    def flat_start(self) -> np.ndarray:
        """|V| = 1, angles 0, P/Q at mid-bounds, storage at x0."""
        lo, hi = self.lower, self.upper
        both = np.isfinite(lo) & np.isfinite(hi)
        z = np.zeros(lo.size)
        z[both] = 0.5 * (lo[both] + hi[both])
        L = self.layout
        for k in range(L.steps):
            z[L.idx("vm", k)] = np.clip(1.0, lo[L.idx("vm", k)], hi[L.idx("vm", k)])
            z[L.idx("va", k)] = 0.0
            z[L.idx("x", k)] = np.clip(self.x0, lo[L.idx("x", k)], hi[L.idx("x", k)])
        z[L.all("aux")] = 0.0
        if self.q_vg_mode == "tied" and self.lin_rows.shape[0]:
            for row, (kind, k, j) in zip(self.lin_rows, self.lin_kinds):
                if kind == "pf_tie":
                    iq = L.idx("qvg", k)[j]
                    ip = L.idx("pvg", k)[j]
                    z[iq] = -row[ip] * z[ip]
        return z

    # -- objective ---------------------------------------------------------

    def objective(self, z) -> float:
        L = self.layout
        pg = z[L.all("pg")].reshape(L.steps, -1)
        pv = z[L.all("pvg")].reshape(L.steps, -1)
        return float(np.sum(self._c2 * pg ** 2 + self._c1 * pg + self._c0)
                     + np.sum(self._a * pv ** 2 + self._b * pv + self._c))

    def gradient(self, z) -> np.ndarray:
        L = self.layout
        g = np.zeros(L.n)
        for k in range(L.steps):
            ip, iv = L.idx("pg", k), L.idx("pvg", k)
            g[ip] = 2 * self._c2 * z[ip] + self._c1
            g[iv] = 2 * self._a[k] * z[iv] + self._b[k]
        return g

    def _objective_hessian(self):
        L = self.layout
        d = np.zeros(L.n)
        for k in range(L.steps):
            d[L.idx("pg", k)] = 2 * self._c2
            d[L.idx("pvg", k)] = 2 * self._a[k]
        return np.diag(d)

    def hessian(self, z) -> np.ndarray:
        return self._obj_hess

    # -- equalities --------------------------------------------------------

    def _row_offsets(self):
        n_own = self.n_own
        o_state = 0
        o_react = n_own
        o_ref = 2 * n_own
        o_aux = o_ref + (1 if self.ref_col is not None else 0)
        return o_state, o_react, o_ref, o_aux

    def constraints(self, z) -> np.ndarray:
        L, dt, n_own = self.layout, self.horizon.dt, self.n_own
        out = np.zeros(self.n_eq)
        o_state, o_react, o_ref, o_aux = self._row_offsets()
        for k in range(L.steps):
            r0 = k * self.n_eq_step
            vm, va = z[L.idx("vm", k)], z[L.idx("va", k)]
            p, q = kernels.injections(vm, va, self._G, self._B)
            x_prev = self.x0 if k == 0 else z[L.idx("x", k - 1)]
            pg, qg = z[L.idx("pg", k)], z[L.idx("qg", k)]
            pv, qv = z[L.idx("pvg", k)], z[L.idx("qvg", k)]
            net_p = self._A_gc @ pg + self._A_dc @ pv + self._d_p[k] - p[:n_own]
            out[r0 + o_state:r0 + o_state + n_own] = z[L.idx("x", k)] - x_prev - dt * net_p
            out[r0 + o_react:r0 + o_react + n_own] = self._A_gc @ qg + self._A_dc @ qv + self._d_q[k] - q[:n_own]
            if self.ref_col is not None:
                out[r0 + o_ref] = va[self.ref_col]
            aux = z[L.idx("aux", k)]
            for t, tie in enumerate(self.ties):
                cols = [tie.col_from, tie.col_to]
                pf, qf = kernels.injections(vm[cols], va[cols], self._tie_G[t], self._tie_B[t])
                out[r0 + o_aux + 2 * t] = aux[2 * t] - tie.sign * pf[0]
                out[r0 + o_aux + 2 * t + 1] = aux[2 * t + 1] - tie.sign * qf[0]
        return out

    def jacobian(self, z) -> np.ndarray:
        L, dt, n_own, n_col = self.layout, self.horizon.dt, self.n_own, self.n_col
        J = np.zeros((self.n_eq, L.n))
        o_state, o_react, o_ref, o_aux = self._row_offsets()
        own = np.arange(n_own)
        for k in range(L.steps):
            r0 = k * self.n_eq_step
            rs = r0 + o_state + own
            rq = r0 + o_react + own
            ivm, iva = L.idx("vm", k), L.idx("va", k)
            vm, va = z[ivm], z[iva]
            Jpf = kernels.jacobian(vm, va, self._G, self._B)
            vcols = np.concatenate([ivm, iva])
            J[np.ix_(rs, vcols)] = dt * Jpf[:n_own]
            J[np.ix_(rq, vcols)] = -Jpf[n_col:n_col + n_own]
            J[rs, L.idx("x", k)] = 1.0
            if k > 0:
                J[rs, L.idx("x", k - 1)] = -1.0
            J[np.ix_(rs, L.idx("pg", k))] = -dt * self._A_gc
            J[np.ix_(rs, L.idx("pvg", k))] = -dt * self._A_dc
            J[np.ix_(rq, L.idx("qg", k))] = self._A_gc
            J[np.ix_(rq, L.idx("qvg", k))] = self._A_dc
            if self.ref_col is not None:
                J[r0 + o_ref, iva[self.ref_col]] = 1.0
            iaux = L.idx("aux", k)
            for t, tie in enumerate(self.ties):
                cols = [tie.col_from, tie.col_to]
                Jb = kernels.jacobian(vm[cols], va[cols], self._tie_G[t], self._tie_B[t])
                bcols = np.array([ivm[tie.col_from], ivm[tie.col_to], iva[tie.col_from], iva[tie.col_to]])
                rp = r0 + o_aux + 2 * t
                J[rp, iaux[2 * t]] = 1.0
                J[rp + 1, iaux[2 * t + 1]] = 1.0
                J[rp, bcols] = -tie.sign * Jb[0]
                J[rp + 1, bcols] = -tie.sign * Jb[2]
        return J

    def constraint_hessian(self, z, y) -> np.ndarray:
        """``sum_r y[r] * hess(constraint_r)``."""
        L, dt, n_own, n_col = self.layout, self.horizon.dt, self.n_own, self.n_col
        H = np.zeros((L.n, L.n))
        o_state, o_react, o_ref, o_aux = self._row_offsets()
        for k in range(L.steps):
            r0 = k * self.n_eq_step
            ivm, iva = L.idx("vm", k), L.idx("va", k)
            vm, va = z[ivm], z[iva]
            lp = np.zeros(n_col)
            lq = np.zeros(n_col)
            lp[:n_own] = dt * y[r0 + o_state:r0 + o_state + n_own]
            lq[:n_own] = -y[r0 + o_react:r0 + o_react + n_own]
            vcols = np.concatenate([ivm, iva])
            H[np.ix_(vcols, vcols)] += kernels.hessian(vm, va, self._G, self._B, lp, lq)
            for t, tie in enumerate(self.ties):
                cols = [tie.col_from, tie.col_to]
                yp = y[r0 + o_aux + 2 * t]
                yq = y[r0 + o_aux + 2 * t + 1]
                Hb = kernels.hessian(vm[cols], va[cols], self._tie_G[t], self._tie_B[t],
                                     np.array([-tie.sign * yp, 0.0]), np.array([-tie.sign * yq, 0.0]))
                bcols = np.array([ivm[tie.col_from], ivm[tie.col_to], iva[tie.col_from], iva[tie.col_to]])
                H[np.ix_(bcols, bcols)] += Hb
        return H

    def to_nlp(self) -> NlpInstance:
        return NlpInstance(
            n_vars=self.n_vars, objective=self.objective, gradient=self.gradient,
            hessian=self.hessian, lower=self.lower, upper=self.upper,
            constraints=self.constraints, jacobian=self.jacobian,
            constraint_hessian=self.constraint_hessian, n_eq=self.n_eq,
            lin_rows=self.lin_rows, lin_lower=self.lin_lower, lin_upper=self.lin_upper)

    # -- diagnostics -------------------------------------------------------

    def losses(self, z) -> np.ndarray:
        """Active losses per step (sum of bus injections); full-network problems only."""
        L = self.layout
        out = np.zeros(L.steps)
        for k in range(L.steps):
            p, _ = kernels.injections(z[L.idx("vm", k)], z[L.idx("va", k)], self._G, self._B)
            out[k] = p.sum()
        return out

    def restricted(self, own_buses, dup_buses, ties, with_reference: bool,
                   x0=None, p_gc_prev=None) -> "EmpcProblem":
        """The same horizon restricted to ``own_buses`` plus read-only copies of ``dup_buses``."""
        own = np.asarray(own_buses, dtype=int)
        gens = np.array([g for g in range(len(self.fleet.gc)) if self.fleet.gc[g].bus in set(own)], dtype=int)
        dcs = np.array([d for d in range(len(self.fleet.dc)) if self.fleet.dc[d].bus in set(own)], dtype=int)
        full_x0 = np.zeros(self.network.n_bus)
        full_x0[self.own_buses] = self.x0
        prev = None
        if self.p_gc_prev is not None:
            full_prev = np.zeros(len(self.fleet.gc))
            full_prev[self.gens] = self.p_gc_prev
            prev = full_prev[gens]
        col = np.concatenate([own, np.asarray(dup_buses, dtype=int)])
        ref_col = None
        if with_reference:
            ref_col = int(np.flatnonzero(col == self.network.reference)[0])
        return EmpcProblem(
            network=self.network, fleet=self.fleet, forecasts=self.forecasts, horizon=self.horizon,
            x0=full_x0[own] if x0 is None else x0,
            p_gc_prev=prev if p_gc_prev is None else p_gc_prev,
            own_buses=own, col_buses=col, gens=gens, dcs=dcs, ties=tuple(ties),
            ref_col=ref_col, q_vg_mode=self.q_vg_mode)


def assemble_empc(network: Network, fleet: DeviceFleet, forecasts: Forecasts,
                  horizon: HorizonConfig, x0, p_gc_prev=None, q_vg_mode: str = "tied") -> EmpcProblem:
    """Build the full-network EMPC for one horizon.

    ``p_gc_prev`` is the dispatch applied at the previous wall-clock step; it
    anchors the first ramp row. ``None`` leaves step 0 unconstrained by ramps.
    """
    n = network.n_bus
    if forecasts.p_ds.shape[1] != len(fleet.ds) or forecasts.p_gs.shape[1] != len(fleet.gs) \
            or forecasts.p_dc.shape[1] != len(fleet.dc):
        raise InputError("forecast device counts disagree with the fleet")
    buses = np.arange(n)
    return EmpcProblem(
        network=network, fleet=fleet, forecasts=forecasts, horizon=horizon,
        x0=np.asarray(x0, dtype=float), p_gc_prev=p_gc_prev,
        own_buses=buses, col_buses=buses,
        gens=np.arange(len(fleet.gc)), dcs=np.arange(len(fleet.dc)),
        ref_col=network.reference, q_vg_mode=q_vg_mode)


def empc_objective_derivatives(problem: EmpcProblem, point) -> dict:
    z = np.asarray(point, dtype=float)
    if z.shape != (problem.n_vars,):
        raise ValueError("point dimension does not match the problem")
    return {"gradient": problem.gradient(z), "hessian": problem.hessian(z).copy()}


def with_horizon(problem: EmpcProblem, **changes) -> EmpcProblem:
    """Rebuild ``problem`` with some constructor fields replaced."""
    return replace(problem, **changes)
