"""Distributed solution of the EMPC with ALADIN.

Each control area solves an augmented-Lagrangian sub-problem over its own
variables plus duplicated neighbour voltages and tie-flow auxiliaries. A
coordinator then solves one equality-constrained QP built from the areas'
Hessians, Jacobians and gradients, and the primal/dual iterates are updated
with full steps.

Consensus rows per step and tie branch (from-bus ``f``, to-bus ``t``)::

    |V_f|, angle_f : owner copy - neighbour copy = 0
    |V_t|, angle_t : owner copy - neighbour copy = 0
    P, Q auxiliaries : from-side + to-side = 0     (equal and opposite)
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import qr

from .empc import EmpcProblem, Tie
from .errors import SolverError, StructuralError
from .grid import Network
from .nlp import IpmOptions, KktPoint, NlpInstance, solve_nlp
from . import kernels

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AladinConfig:
    rho0: float = 1e2
    mu0: float = 1e3
    r_rho: float = 1.5
    r_mu: float = 2.0
    rho_max: float = 1e5
    mu_max: float = 1e5
    tol: float = 1e-4
    max_iter: int = 100
    local_tol: float = 1e-8
    local_max_iter: int = 200
    hessian_floor: float = 1e-8
    qp_tol: float = 1e-10
    threads: int = 1


@dataclass(frozen=True)
class Partition:
    areas: tuple[tuple[int, ...], ...]
    tie_branches: tuple[int, ...]

    @classmethod
    def from_areas(cls, network: Network, areas) -> "Partition":
        areas = tuple(tuple(sorted(int(b) for b in a)) for a in areas)
        where = {}
        for i, a in enumerate(areas):
            for b in a:
                where.setdefault(b, []).append(i)
        ties = tuple(k for k, br in enumerate(network.branches)
                     if where.get(br.from_bus, [None])[0] != where.get(br.to_bus, [None])[0])
        return cls(areas, ties)

    def area_of(self, bus: int) -> int:
        for i, a in enumerate(self.areas):
            if bus in a:
                return i
        raise StructuralError(f"bus {bus} is in no area")

    def diagnostics(self, network: Network) -> list[str]:
        out = []
        seen = {}
        for i, a in enumerate(self.areas):
            if not a:
                out.append(f"area {i} is empty")
            for b in a:
                if b in seen:
                    out.append(f"bus {b} is in areas {seen[b]} and {i}")
                seen[b] = i
        missing = sorted(set(range(network.n_bus)) - set(seen))
        if missing:
            out.append(f"buses {missing} belong to no area")
        extra = sorted(set(seen) - set(range(network.n_bus)))
        if extra:
            out.append(f"areas reference missing buses {extra}")
        if out:
            return out
        for i, a in enumerate(self.areas):
            sub = [br for br in network.branches if br.from_bus in a and br.to_bus in a]
            relabel = {b: j for j, b in enumerate(a)}
            sub_net = Network(tuple(network.buses[b] for b in a), ())
            inner = [replace(br, from_bus=relabel[br.from_bus], to_bus=relabel[br.to_bus]) for br in sub]
            if len(a) > 1 and not replace(sub_net, branches=tuple(inner)).is_connected():
                out.append(f"area {i} is not internally connected")
        return out

    def validate(self, network: Network):
        diags = self.diagnostics(network)
        if diags:
            raise StructuralError("; ".join(diags))


@dataclass
class AreaSubproblem:
    """One area's share of the EMPC.

    ``source`` maps each local variable to the global EMPC index it copies
    (``-1`` for tie-flow auxiliaries); ``owned`` marks variables the area is
    authoritative for.
    """
    area: int
    problem: EmpcProblem
    source: np.ndarray
    owned: np.ndarray
    consensus: np.ndarray

    @property
    def n_vars(self) -> int:
        return self.problem.n_vars

    def localize(self, z_global) -> np.ndarray:
        """Local copy of a global point, with auxiliaries evaluated from the voltages."""
        y = np.zeros(self.n_vars)
        m = self.source >= 0
        y[m] = np.asarray(z_global)[self.source[m]]
        P = self.problem
        L = P.layout
        for k in range(L.steps):
            vm, va = y[L.idx("vm", k)], y[L.idx("va", k)]
            aux = L.idx("aux", k)
            for t, tie in enumerate(P.ties):
                cols = [tie.col_from, tie.col_to]
                pf, qf = kernels.injections(vm[cols], va[cols], P._tie_G[t], P._tie_B[t])
                y[aux[2 * t]] = tie.sign * pf[0]
                y[aux[2 * t + 1]] = tie.sign * qf[0]
        return y


@dataclass
class LocalResult:
    area: int
    y: np.ndarray
    gradient: np.ndarray
    jacobian: np.ndarray
    hessian: np.ndarray
    kkt: KktPoint
    objective: float
    # step box and inequality rows, relative to y
    step_lower: np.ndarray = None
    step_upper: np.ndarray = None
    ineq_rows: np.ndarray = None
    ineq_lower: np.ndarray = None
    ineq_upper: np.ndarray = None


@dataclass
class QpResult:
    delta: list
    lambda_qp: np.ndarray
    slack: np.ndarray
    kkt_residual: float
    iterations: int = 0


@dataclass
class AladinState:
    z: list
    lam: np.ndarray
    rho: float
    mu: float
    iteration: int = 0
    log: list = field(default_factory=list)


@dataclass
class AladinResult:
    solution: np.ndarray
    objective: float
    converged: bool
    iterations: int
    log: list
    consensus_residual: float
    boundary_mismatch: dict
    locals: list
    lam: np.ndarray
    z: list
    subproblems: list

    LOG_COLUMNS = ("iteration", "rho", "mu", "consensus_residual", "primal_change", "objective")

    def log_table(self, sep: str = ",") -> str:
        lines = [sep.join(self.LOG_COLUMNS)]
        for row in self.log:
            lines.append(sep.join(f"{row[c]:.12g}" if isinstance(row[c], float) else str(row[c])
                                  for c in self.LOG_COLUMNS))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# partition
# ---------------------------------------------------------------------------

def partition_problem(empc: EmpcProblem, partition: Partition) -> list[AreaSubproblem]:
    net = empc.network
    partition.validate(net)
    ref = net.reference
    T = empc.horizon.steps
    GL = empc.layout
    ties_global = [net.branches[k] for k in partition.tie_branches]
    areas = partition.areas
    owner = {b: i for i, a in enumerate(areas) for b in a}
    subs = []
    tie_pos = []  # per area: {tie index: local tie slot}
    col_pos = []  # per area: {bus: column}
    for i, own in enumerate(areas):
        own = np.array(own, dtype=int)
        dup = sorted({br.to_bus if owner[br.from_bus] == i else br.from_bus
                      for br in ties_global if i in (owner[br.from_bus], owner[br.to_bus])})
        col = np.concatenate([own, np.array(dup, dtype=int)])
        cpos = {int(b): j for j, b in enumerate(col)}
        ties, slots = [], {}
        for t, br in enumerate(ties_global):
            if i not in (owner[br.from_bus], owner[br.to_bus]):
                continue
            sign = 1.0 if owner[br.from_bus] == i else -1.0
            slots[t] = len(ties)
            ties.append(Tie(br, sign, cpos[br.from_bus], cpos[br.to_bus]))
        local = empc.restricted(own, dup, ties, with_reference=ref in set(own.tolist()))
        LL = local.layout
        source = np.full(LL.n, -1, dtype=int)
        owned = np.zeros(LL.n, dtype=bool)
        gpos = {int(g): j for j, g in enumerate(empc.gens)}
        dpos = {int(d): j for j, d in enumerate(empc.dcs)}
        for k in range(T):
            for name, devs, pos in (("pg", local.gens, gpos), ("qg", local.gens, gpos),
                                    ("pvg", local.dcs, dpos), ("qvg", local.dcs, dpos)):
                li = LL.idx(name, k)
                gi = GL.idx(name, k)
                source[li] = gi[[pos[int(d)] for d in devs]]
                owned[li] = True
            for name in ("vm", "va"):
                li = LL.idx(name, k)
                source[li] = GL.idx(name, k)[col]
                owned[li[:own.size]] = True
            source[LL.idx("x", k)] = GL.idx("x", k)[own]
            owned[LL.idx("x", k)] = True
        subs.append(AreaSubproblem(i, local, source, owned, np.zeros((0, LL.n))))
        tie_pos.append(slots)
        col_pos.append(cpos)

    n_rows = T * 6 * len(ties_global)
    A = [np.zeros((n_rows, s.n_vars)) for s in subs]
    r = 0
    for k in range(T):
        for t, br in enumerate(ties_global):
            a_f, a_t = owner[br.from_bus], owner[br.to_bus]
            Lf, Lt = subs[a_f].problem.layout, subs[a_t].problem.layout
            for bus, own_area, other in ((br.from_bus, a_f, a_t), (br.to_bus, a_t, a_f)):
                for name in ("vm", "va"):
                    A[own_area][r, subs[own_area].problem.layout.idx(name, k)[col_pos[own_area][bus]]] = 1.0
                    A[other][r, subs[other].problem.layout.idx(name, k)[col_pos[other][bus]]] = -1.0
                    r += 1
            for comp in (0, 1):
                A[a_f][r, Lf.idx("aux", k)[2 * tie_pos[a_f][t] + comp]] = 1.0
                A[a_t][r, Lt.idx("aux", k)[2 * tie_pos[a_t][t] + comp]] = 1.0
                r += 1
    for s, a in zip(subs, A):
        s.consensus = a
    return subs


def stitch(subs, ys) -> np.ndarray:
    n = max(int(s.source.max(initial=-1)) for s in subs) + 1
    z = np.zeros(n)
    for s, y in zip(subs, ys):
        m = s.owned
        z[s.source[m]] = y[m]
    return z


def consensus_residual(subs, ys) -> np.ndarray:
    if not subs or subs[0].consensus.shape[0] == 0:
        return np.zeros(0)
    # fixed area order keeps the sum independent of scheduling
    out = np.zeros(subs[0].consensus.shape[0])
    for s, y in zip(subs, ys):
        out = out + s.consensus @ y
    return out


# ---------------------------------------------------------------------------
# local step
# ---------------------------------------------------------------------------

def _augmented_instance(sub: AreaSubproblem, z_slice, lam, rho) -> NlpInstance:
    base = sub.problem.to_nlp()
    A = sub.consensus
    lin = A.T @ lam if A.shape[0] else np.zeros(sub.n_vars)
    f0, g0, h0 = base.objective, base.gradient, base.hessian
    eye = rho * np.eye(sub.n_vars)

    def objective(y):
        d = y - z_slice
        return f0(y) + lin @ y + 0.5 * rho * (d @ d)

    def gradient(y):
        return g0(y) + lin + rho * (y - z_slice)

    def hessian(y):
        return h0(y) + eye

    return replace(base, objective=objective, gradient=gradient, hessian=hessian)


def floor_eigenvalues(H, floor):
    H = 0.5 * (H + H.T)
    w, V = np.linalg.eigh(H)
    if w.min(initial=np.inf) >= floor:
        return H
    w = np.maximum(w, floor)
    return (V * w) @ V.T


def _independent_rows(M, tol=1e-10):
    if M.shape[0] == 0:
        return M
    _, R, piv = qr(M.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0:
        return M[:0]
    rank = int(np.count_nonzero(d > tol * max(1.0, d[0])))
    return M[np.sort(piv[:rank])]


def equality_jacobian(sub: AreaSubproblem, y) -> np.ndarray:
    """Nonlinear equality Jacobian stacked with the linear equality rows; dependent rows dropped."""
    P = sub.problem
    rows = [P.jacobian(y)]
    if P.lin_rows.shape[0]:
        rows.append(P.lin_rows[P.lin_lower == P.lin_upper])
    return _independent_rows(np.vstack(rows))


def local_step(sub: AreaSubproblem, z_slice, lam, rho, config: AladinConfig = AladinConfig(),
               warm: KktPoint | None = None, iteration: int = 0) -> LocalResult:
    """Solve the area's augmented sub-problem and return its sensitivities."""
    inst = _augmented_instance(sub, np.asarray(z_slice, dtype=float), lam, rho)
    # the previous local solution is feasible for this area, the consensus
    # point usually is not; start there and let the proximal term pull
    attempts = []
    if warm is not None:
        attempts.append((warm.primal, warm, IpmOptions(mu_init=1e-4, bound_push=1e-8)))
        attempts.append((warm.primal, None, None))
    attempts.append((z_slice, None, None))
    kkt = None
    for x_start, w, opts in attempts:
        kkt = solve_nlp(inst, x_start, tol=config.local_tol, max_iter=config.local_max_iter,
                        warm=w, options=opts)
        if kkt.converged:
            break
    if not kkt.converged:
        raise SolverError(f"area {sub.area} local solve failed at ALADIN iteration {iteration}: "
                          f"{kkt.status} {kkt.message} (residual {kkt.kkt_residual:.2e})",
                          area=sub.area, iteration=iteration)
    P = sub.problem
    y = kkt.primal
    H = P.hessian(y) + P.constraint_hessian(y, kkt.eq_multipliers)
    ineq = P.lin_lower != P.lin_upper
    ay = P.lin_rows[ineq] @ y
    return LocalResult(
        area=sub.area, y=y, gradient=P.gradient(y),
        jacobian=equality_jacobian(sub, y),
        hessian=floor_eigenvalues(H, config.hessian_floor),
        kkt=kkt, objective=P.objective(y),
        step_lower=P.lower - y, step_upper=P.upper - y,
        ineq_rows=P.lin_rows[ineq], ineq_lower=P.lin_lower[ineq] - ay, ineq_upper=P.lin_upper[ineq] - ay)


# ---------------------------------------------------------------------------
# coordinator
# ---------------------------------------------------------------------------

def consensus_qp(locals_, consensus_mats, lam, mu, tol: float = 1e-10, max_iter: int = 200) -> QpResult:
    """Coupled QP of the coordinator.

        min  sum_i 1/2 dy_i' H_i dy_i + g_i' dy_i + lam' s + mu/2 |s|^2
        s.t. J_i dy_i = 0,  sum_i A_i (y_i + dy_i) = s
             box and inequality rows of every area, relative to y_i

    The inequalities are kept whole rather than guessed as an active set, so
    a step never leaves the boxes and a bound held with the wrong multiplier
    sign is released. Solved with the interior-point NLP solver.
    """
    sizes = [loc.y.size for loc in locals_]
    N = sum(sizes)
    nc = consensus_mats[0].shape[0] if consensus_mats else 0
    n = N + nc
    off = np.cumsum([0] + sizes)
    H = np.zeros((n, n))
    g = np.zeros(n)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    eq_blocks, ineq_blocks = [], []
    cons = np.zeros((nc, n))
    ay = np.zeros(nc)
    for i, loc in enumerate(locals_):
        sl = slice(off[i], off[i + 1])
        H[sl, sl] = loc.hessian
        g[sl] = loc.gradient
        lo[sl] = loc.step_lower
        hi[sl] = loc.step_upper
        if loc.jacobian.shape[0]:
            blk = np.zeros((loc.jacobian.shape[0], n))
            blk[:, sl] = loc.jacobian
            eq_blocks.append(blk)
        if loc.ineq_rows.shape[0]:
            blk = np.zeros((loc.ineq_rows.shape[0], n))
            blk[:, sl] = loc.ineq_rows
            ineq_blocks.append((blk, loc.ineq_lower, loc.ineq_upper))
        if nc:
            cons[:, sl] = consensus_mats[i]
            ay = ay + consensus_mats[i] @ loc.y
    if nc:
        cons[:, N:] = -np.eye(nc)
        H[N:, N:] = mu * np.eye(nc)
        g[N:] = lam
    n_eq = sum(b.shape[0] for b in eq_blocks)
    rows = eq_blocks + [cons] + [b for b, _, _ in ineq_blocks]
    rlo = [np.zeros(n_eq), -ay] + [l for _, l, _ in ineq_blocks]
    rhi = [np.zeros(n_eq), -ay] + [u for _, _, u in ineq_blocks]
    inst = NlpInstance(n, lambda w: 0.5 * w @ H @ w + g @ w, lambda w: H @ w + g, lambda w: H, lo, hi,
                       lin_rows=np.vstack(rows), lin_lower=np.concatenate(rlo), lin_upper=np.concatenate(rhi))
    start = np.clip(np.zeros(n), lo, hi)
    kkt = solve_nlp(inst, start, tol=tol, max_iter=max_iter)
    if not kkt.converged:
        raise SolverError(f"coordinator QP failed: {kkt.status} {kkt.message} "
                          f"(residual {kkt.kkt_residual:.2e})")
    sol = kkt.primal
    delta = [sol[off[i]:off[i + 1]] for i in range(len(locals_))]
    lam_qp = kkt.lin_multipliers[n_eq:n_eq + nc]
    return QpResult(delta, lam_qp, sol[N:], kkt.kkt_residual, kkt.iterations)


def update_iterates(state: AladinState, locals_, qp: QpResult, alphas=(1.0, 1.0, 1.0)) -> AladinState:
    a1, a2, a3 = alphas
    z = [zi + a1 * (loc.y - zi) + a2 * d for zi, loc, d in zip(state.z, locals_, qp.delta)]
    lam = state.lam + a3 * (qp.lambda_qp - state.lam)
    return replace(state, z=z, lam=lam)


def update_penalties(state: AladinState, config: AladinConfig = AladinConfig()) -> AladinState:
    rho = min(config.r_rho * state.rho, config.rho_max) if state.rho < config.rho_max else state.rho
    mu = min(config.r_mu * state.mu, config.mu_max) if state.mu < config.mu_max else state.mu
    return replace(state, rho=rho, mu=mu)


def consensus_multipliers(subs, z_locals, tol: float = 1e-8) -> np.ndarray:
    """Consensus duals that make ``z_locals`` stationary for every area.

    Solves the stacked local stationarity conditions in least squares; used to
    start ALADIN at a known optimum.
    """
    nc = subs[0].consensus.shape[0]
    blocks, rhs = [], []
    for s, y in zip(subs, z_locals):
        P = s.problem
        cols = [P.jacobian(y).T]
        if P.lin_rows.shape[0]:
            ay = P.lin_rows @ y
            act = (P.lin_lower == P.lin_upper) | (np.abs(ay - P.lin_lower) <= tol) \
                | (np.abs(P.lin_upper - ay) <= tol)
            cols.append(P.lin_rows[act].T)
        act_b = (np.abs(y - P.lower) <= tol) | (np.abs(P.upper - y) <= tol)
        cols.append(np.eye(s.n_vars)[:, act_b])
        blocks.append((s.consensus.T, np.hstack(cols)))
        rhs.append(-P.gradient(y))
    n_loc = [b[1].shape[1] for b in blocks]
    M = np.zeros((sum(s.n_vars for s in subs), nc + sum(n_loc)))
    r = 0
    c = nc
    for (At, C), nl in zip(blocks, n_loc):
        n = At.shape[0]
        M[r:r + n, :nc] = At
        M[r:r + n, c:c + nl] = C
        r += n
        c += nl
    sol, *_ = np.linalg.lstsq(M, np.concatenate(rhs), rcond=None)
    return sol[:nc]


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def boundary_mismatch(subs, ys) -> dict:
    """Max-abs consensus violation split into voltage magnitude, angle and tie-flow rows."""
    res = consensus_residual(subs, ys)
    if res.size == 0:
        return {"vm": 0.0, "va": 0.0, "p": 0.0, "q": 0.0}
    kind = np.tile(np.array([0, 1, 0, 1, 2, 3]), res.size // 6)
    out = {}
    for key, code in (("vm", 0), ("va", 1), ("p", 2), ("q", 3)):
        sel = res[kind == code]
        out[key] = float(np.abs(sel).max(initial=0.0))
    return out


def aladin_solve(empc: EmpcProblem, partition: Partition, config: AladinConfig = AladinConfig(),
                 z_init=None, lam_init=None, subs=None) -> AladinResult:
    """Run ALADIN to consensus.

    ``z_init`` is a global EMPC point (flat start when ``None``) or a list of
    local vectors; ``lam_init`` seeds the consensus duals (zeros by default).
    """
    if subs is None:
        subs = partition_problem(empc, partition)
    nc = subs[0].consensus.shape[0]
    if z_init is None:
        z_init = empc.flat_start()
    if isinstance(z_init, (list, tuple)):
        z = [np.asarray(zi, dtype=float).copy() for zi in z_init]
    else:
        z = [s.localize(z_init) for s in subs]
    lam = np.zeros(nc) if lam_init is None else np.asarray(lam_init, dtype=float).copy()
    state = AladinState(z=z, lam=lam, rho=config.rho0, mu=config.mu0)
    warm = [None] * len(subs)
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 and len(subs) > 1 else None
    converged = False
    locs = None
    try:
        for it in range(config.max_iter):
            rho = state.rho if nc else 0.0

            def work(i, state=state, rho=rho, it=it):
                return local_step(subs[i], state.z[i], state.lam, rho, config,
                                  warm=warm[i], iteration=it)

            if pool is not None:
                locs = list(pool.map(work, range(len(subs))))
            else:
                locs = [work(i) for i in range(len(subs))]
            warm = [loc.kkt for loc in locs]
            ys = [loc.y for loc in locs]
            cres = consensus_residual(subs, ys)
            c_inf = float(np.abs(cres).max(initial=0.0))
            p_change = max(float(np.abs(y - zi).max(initial=0.0)) for y, zi in zip(ys, state.z))
            obj = float(sum(loc.objective for loc in locs))
            state.log.append({"iteration": it, "rho": float(state.rho), "mu": float(state.mu),
                              "consensus_residual": c_inf, "primal_change": p_change, "objective": obj})
            state.iteration = it + 1
            if nc == 0 or max(c_inf, p_change) <= config.tol:
                converged = True
                break
            qp = consensus_qp(locs, [s.consensus for s in subs], state.lam, state.mu, tol=config.qp_tol)
            state = update_iterates(state, locs, qp)
            state = update_penalties(state, config)
    finally:
        if pool is not None:
            pool.shutdown()
    ys = [loc.y for loc in locs]
    sol = stitch(subs, ys)
    cres = consensus_residual(subs, ys)
    return AladinResult(
        solution=sol, objective=empc.objective(sol), converged=converged,
        iterations=state.iteration, log=state.log,
        consensus_residual=float(np.abs(cres).max(initial=0.0)),
        boundary_mismatch=boundary_mismatch(subs, ys), locals=locs, lam=state.lam,
        z=state.z, subproblems=subs)
