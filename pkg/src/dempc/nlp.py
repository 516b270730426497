"""Local solver for smooth NLPs with equality constraints, variable bounds and
linear rows.

    min f(x)  s.t.  c(x) = 0,  lo <= A x <= hi,  lower <= x <= upper

The method is a primal-dual interior point with exact Hessians, a symmetric
indefinite (Bunch-Kaufman) factorization whose inertia drives the Hessian
regularization, and a filter line search. Variables with equal bounds are
eliminated, linear rows with equal bounds become equalities and the remaining
linear rows get slack variables.

Multiplier sign convention for the returned point::

    grad f + J^T y_eq + A^T y_lin - z_lower + z_upper = 0,   z_lower, z_upper >= 0
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lapack

from . import kernels

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"


@dataclass
class NlpInstance:
    n_vars: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    constraints: Callable[[np.ndarray], np.ndarray] | None = None
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    constraint_hessian: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    n_eq: int = 0
    lin_rows: np.ndarray | None = None
    lin_lower: np.ndarray | None = None
    lin_upper: np.ndarray | None = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != (self.n_vars,) or self.upper.shape != (self.n_vars,):
            raise ValueError("bound vectors must have length n_vars")
        if np.any(self.lower > self.upper):
            bad = np.flatnonzero(self.lower > self.upper)
            raise ValueError(f"lower > upper at variables {bad[:10].tolist()}")
        if self.lin_rows is None:
            self.lin_rows = np.zeros((0, self.n_vars))
            self.lin_lower = np.zeros(0)
            self.lin_upper = np.zeros(0)
        self.lin_rows = np.atleast_2d(np.asarray(self.lin_rows, dtype=float))
        self.lin_lower = np.asarray(self.lin_lower, dtype=float)
        self.lin_upper = np.asarray(self.lin_upper, dtype=float)

    @property
    def n_lin(self) -> int:
        return self.lin_rows.shape[0]

    def eval_constraints(self, x):
        if self.n_eq == 0:
            return np.zeros(0)
        return self.constraints(x)

    def eval_jacobian(self, x):
        if self.n_eq == 0:
            return np.zeros((0, self.n_vars))
        return self.jacobian(x)

    def lagrangian_hessian(self, x, y):
        H = self.hessian(x)
        if self.n_eq and np.any(y):
            H = H + self.constraint_hessian(x, y)
        return H


@dataclass
class KktPoint:
    primal: np.ndarray
    eq_multipliers: np.ndarray
    lin_multipliers: np.ndarray
    lower_multipliers: np.ndarray
    upper_multipliers: np.ndarray
    kkt_residual: float = math.inf
    status: str = MAX_ITER
    iterations: int = 0
    objective: float = math.nan
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


@dataclass
class IpmOptions:
    mu_init: float = 0.1
    bound_push: float = 1e-2
    kappa_eps: float = 10.0
    kappa_mu: float = 0.2
    theta_mu: float = 1.5
    tau_min: float = 0.99
    delta_first: float = 1e-8
    delta_growth: float = 10.0
    delta_max: float = 1e4
    max_backtracks: int = 30


@dataclass
class DerivativeReport:
    gradient_error: np.ndarray
    jacobian_error: np.ndarray
    hessian_error: np.ndarray | None
    threshold: float
    flagged: list = field(default_factory=list)

    @property
    def max_error(self) -> float:
        parts = [self.gradient_error.max(initial=0.0), self.jacobian_error.max(initial=0.0)]
        if self.hessian_error is not None:
            parts.append(self.hessian_error.max(initial=0.0))
        return float(max(parts))

    @property
    def ok(self) -> bool:
        return not self.flagged


# ---------------------------------------------------------------------------
# KKT residual
# ---------------------------------------------------------------------------

def kkt_residual(instance: NlpInstance, point: KktPoint) -> float:
    """Max-norm of stacked stationarity, feasibility and complementarity residuals."""
    x = point.primal
    lo, hi = instance.lower, instance.upper
    zl, zu = point.lower_multipliers, point.upper_multipliers
    A = instance.lin_rows
    ylin = point.lin_multipliers
    stat = instance.gradient(x) - zl + zu
    parts = []
    if instance.n_eq:
        c = instance.eval_constraints(x)
        stat = stat + instance.eval_jacobian(x).T @ point.eq_multipliers
        parts.append(np.abs(c))
    if instance.n_lin:
        stat = stat + A.T @ ylin
        ax = A @ x
        parts.append(np.maximum(instance.lin_lower - ax, 0.0))
        parts.append(np.maximum(ax - instance.lin_upper, 0.0))
        eq_rows = instance.lin_lower == instance.lin_upper
        up_gap = np.where(np.isfinite(instance.lin_upper), instance.lin_upper - ax, 0.0)
        lo_gap = np.where(np.isfinite(instance.lin_lower), ax - instance.lin_lower, 0.0)
        comp = np.where(ylin > 0, ylin * up_gap, -ylin * lo_gap)
        comp[eq_rows] = 0.0
        # a multiplier on a row with no bound on that side is a dual violation
        dual_bad = np.where(ylin > 0, ylin * ~np.isfinite(instance.lin_upper),
                            -ylin * ~np.isfinite(instance.lin_lower))
        dual_bad[eq_rows] = 0.0
        parts.extend([np.abs(comp), np.abs(dual_bad)])
    parts.append(np.abs(stat))
    parts.append(np.maximum(lo - x, 0.0))
    parts.append(np.maximum(x - hi, 0.0))
    fin_lo = np.isfinite(lo)
    fin_hi = np.isfinite(hi)
    parts.append(np.abs(zl[fin_lo] * (x[fin_lo] - lo[fin_lo])))
    parts.append(np.abs(zu[fin_hi] * (hi[fin_hi] - x[fin_hi])))
    parts.append(np.maximum(-zl, 0.0))
    parts.append(np.maximum(-zu, 0.0))
    parts.append(np.abs(zl[~fin_lo]))
    parts.append(np.abs(zu[~fin_hi]))
    return float(max((p.max(initial=0.0) for p in parts), default=0.0))


# ---------------------------------------------------------------------------
# reduced problem used by the interior-point iteration
# ---------------------------------------------------------------------------

class _Reduced:
    """Bookkeeping that maps ``w = [x_free; s]`` back to the instance."""

    def __init__(self, inst: NlpInstance):
        self.inst = inst
        n = inst.n_vars
        fixed = inst.lower == inst.upper
        self.free = np.flatnonzero(~fixed)
        self.fixed = np.flatnonzero(fixed)
        self.x_fixed = inst.lower[fixed].copy()
        A = inst.lin_rows
        if inst.n_lin:
            row_eq = inst.lin_lower == inst.lin_upper
            keep = np.isfinite(inst.lin_lower) | np.isfinite(inst.lin_upper)
        else:
            row_eq = np.zeros(0, bool)
            keep = np.zeros(0, bool)
        self.eq_rows = np.flatnonzero(row_eq)
        self.in_rows = np.flatnonzero(~row_eq & keep)
        self.A_eq = A[self.eq_rows][:, self.free]
        self.b_eq = inst.lin_lower[self.eq_rows]
        self.A_in = A[self.in_rows][:, self.free]
        # contribution of fixed variables to linear rows
        if inst.n_lin and self.fixed.size:
            shift = A[:, self.fixed] @ self.x_fixed
        else:
            shift = np.zeros(inst.n_lin)
        self.b_eq = self.b_eq - shift[self.eq_rows]
        self.in_shift = shift[self.in_rows]
        self.nf = self.free.size
        self.ns = self.in_rows.size
        self.nw = self.nf + self.ns
        self.m_nl = inst.n_eq
        self.m = self.m_nl + self.eq_rows.size + self.ns
        self.lw = np.concatenate([inst.lower[self.free], inst.lin_lower[self.in_rows]])
        self.uw = np.concatenate([inst.upper[self.free], inst.lin_upper[self.in_rows]])
        self.has_l = np.isfinite(self.lw)
        self.has_u = np.isfinite(self.uw)

    def full_x(self, w):
        x = np.empty(self.inst.n_vars)
        x[self.free] = w[:self.nf]
        x[self.fixed] = self.x_fixed
        return x

    def cons(self, w, x):
        xf = w[:self.nf]
        parts = [self.inst.eval_constraints(x)]
        if self.eq_rows.size:
            parts.append(self.A_eq @ xf - self.b_eq)
        if self.ns:
            parts.append(self.A_in @ xf + self.in_shift - w[self.nf:])
        return np.concatenate(parts)

    def jac(self, x):
        J = np.zeros((self.m, self.nw))
        if self.m_nl:
            J[:self.m_nl, :self.nf] = self.inst.eval_jacobian(x)[:, self.free]
        r = self.m_nl
        if self.eq_rows.size:
            J[r:r + self.eq_rows.size, :self.nf] = self.A_eq
            r += self.eq_rows.size
        if self.ns:
            J[r:, :self.nf] = self.A_in
            J[r:, self.nf:] = -np.eye(self.ns)
        return J

    def grad(self, x):
        g = np.zeros(self.nw)
        g[:self.nf] = self.inst.gradient(x)[self.free]
        return g

    def hess(self, x, y):
        W = np.zeros((self.nw, self.nw))
        H = self.inst.lagrangian_hessian(x, y[:self.m_nl])
        W[:self.nf, :self.nf] = H[np.ix_(self.free, self.free)]
        return W

    def initial_w(self, x0, push):
        x0 = np.clip(x0, self.inst.lower, self.inst.upper)
        w = np.concatenate([x0[self.free], self.A_in @ x0[self.free] + self.in_shift])
        return self.push_interior(w, push)

    def push_interior(self, w, push):
        lw, uw = self.lw, self.uw
        span = np.where(self.has_l & self.has_u, uw - lw, np.inf)
        pl = np.minimum(push * np.maximum(1.0, np.abs(np.where(self.has_l, lw, 0.0))), push * span)
        pu = np.minimum(push * np.maximum(1.0, np.abs(np.where(self.has_u, uw, 0.0))), push * span)
        w = np.where(self.has_l, np.maximum(w, lw + pl), w)
        w = np.where(self.has_u, np.minimum(w, uw - pu), w)
        # narrow boxes where the push rounds onto a bound: use the midpoint
        stuck = (self.has_l & (w <= lw)) | (self.has_u & (w >= uw))
        if np.any(stuck):
            w = np.where(stuck, 0.5 * (lw + uw), w)
        return w

    def expand(self, w, y, zl, zu):
        """Map reduced iterate to a KktPoint on the original instance."""
        inst = self.inst
        x = self.full_x(w)
        y_nl = y[:self.m_nl].copy()
        ylin = np.zeros(inst.n_lin)
        r = self.m_nl
        ylin[self.eq_rows] = y[r:r + self.eq_rows.size]
        r += self.eq_rows.size
        # stationarity in the slack: -y_s - zl_s + zu_s = 0, row multiplier is y_s
        ylin[self.in_rows] = y[r:]
        zl_x = np.zeros(inst.n_vars)
        zu_x = np.zeros(inst.n_vars)
        zl_x[self.free] = zl[:self.nf]
        zu_x[self.free] = zu[:self.nf]
        if self.fixed.size:
            # fixed variables carry whatever multiplier closes stationarity
            g = inst.gradient(x)
            if self.m_nl:
                g = g + inst.eval_jacobian(x).T @ y_nl
            if inst.n_lin:
                g = g + inst.lin_rows.T @ ylin
            gf = g[self.fixed]
            zl_x[self.fixed] = np.maximum(gf, 0.0)
            zu_x[self.fixed] = np.maximum(-gf, 0.0)
        return KktPoint(x, y_nl, ylin, zl_x, zu_x)


def _factor(K, n_pos, n_neg):
    lu, ipiv, info = lapack.dsytrf(K, lower=1)
    if info < 0:
        raise RuntimeError(f"dsytrf argument error {info}")
    # barrier diagonals can reach 1e14, so any relative pivot tolerance would
    # misread genuine small Schur pivots as zeros; only exact zeros count
    npos, nneg, nzero = kernels.inertia(lu, ipiv, 0.0)
    ok = info == 0 and nzero == 0 and npos == n_pos and nneg == n_neg
    return ok, (lu, ipiv), nzero


def _solve_factored(fac, rhs):
    lu, ipiv = fac
    x, info = lapack.dsytrs(lu, ipiv, rhs, lower=1)
    return x


def _frac_to_boundary(v, dv, lo, hi, has_l, has_u, tau):
    alpha = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        m = has_l & (dv < 0)
        if np.any(m):
            alpha = min(alpha, float(np.min(-tau * (v[m] - lo[m]) / dv[m])))
        m = has_u & (dv > 0)
        if np.any(m):
            alpha = min(alpha, float(np.min(tau * (hi[m] - v[m]) / dv[m])))
    return max(alpha, 0.0)


def _dual_frac(z, dz, tau):
    m = dz < 0
    if not np.any(m):
        return 1.0
    return max(0.0, min(1.0, float(np.min(-tau * z[m] / dz[m]))))


def solve_nlp(instance: NlpInstance, start, tol: float = 1e-8, max_iter: int = 200,
              warm: KktPoint | None = None, options: IpmOptions | None = None) -> KktPoint:
    """Solve ``instance`` from ``start`` (clamped into the bounds).

    ``warm`` may carry multipliers from a related earlier solve; they seed the
    dual iterate. Returns a :class:`KktPoint` whose ``status`` is ``converged``
    when :func:`kkt_residual` is at most ``tol``.
    """
    opt = options or IpmOptions()
    R = _Reduced(instance)
    start = np.asarray(start, dtype=float)
    if start.shape != (instance.n_vars,):
        raise ValueError("start has the wrong dimension")
    mu = opt.mu_init
    w = R.initial_w(start, opt.bound_push)
    lw, uw, has_l, has_u = R.lw, R.uw, R.has_l, R.has_u
    nw, m = R.nw, R.m
    mu_min = tol / 10.0

    def slacks(w):
        sl = np.where(has_l, w - lw, 1.0)
        su = np.where(has_u, uw - w, 1.0)
        return sl, su

    sl, su = slacks(w)
    zl = np.where(has_l, mu / sl, 0.0)
    zu = np.where(has_u, mu / su, 0.0)
    y = np.zeros(m)
    if warm is not None:
        y = _reduce_eq_multipliers(R, warm)
        zl_w = np.concatenate([warm.lower_multipliers[R.free], np.maximum(-warm.lin_multipliers[R.in_rows], 0.0)])
        zu_w = np.concatenate([warm.upper_multipliers[R.free], np.maximum(warm.lin_multipliers[R.in_rows], 0.0)])
        zl = np.where(has_l, np.maximum(zl_w, mu / sl * 1e-3), 0.0)
        zu = np.where(has_u, np.maximum(zu_w, mu / su * 1e-3), 0.0)

    x = R.full_x(w)
    f = float(instance.objective(x))
    c = R.cons(w, x)
    if warm is None and m:
        y = _ls_multipliers(R, x, R.grad(x) - zl + zu)

    def barrier(w, f):
        sl, su = slacks(w)
        return f - mu * (np.sum(np.log(sl[has_l])) + np.sum(np.log(su[has_u])))

    theta0 = float(np.abs(c).sum())
    theta_max = 1e4 * max(1.0, theta0)
    theta_min = 1e-4 * max(1.0, theta0)
    filt: list[tuple[float, float]] = []
    delta_last = 0.0
    status = MAX_ITER
    message = ""
    it = 0
    for it in range(max_iter + 1):
        if not (np.isfinite(f) and np.all(np.isfinite(c))):
            status, message = INFEASIBLE, "non-finite objective or constraint value"
            break
        g = R.grad(x)
        J = R.jac(x)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(J))):
            status, message = INFEASIBLE, "non-finite derivative"
            break
        sl, su = slacks(w)
        grad_l = g + J.T @ y - zl + zu
        comp_l = np.where(has_l, sl * zl, 0.0)
        comp_u = np.where(has_u, su * zu, 0.0)
        feas = float(np.abs(c).max(initial=0.0))
        err0 = max(float(np.abs(grad_l).max(initial=0.0)), feas,
                   float(comp_l.max(initial=0.0)), float(comp_u.max(initial=0.0)))
        log.debug("it %3d  mu %.1e  f %.6e  feas %.1e  dual %.1e  comp %.1e  dw %.0e",
                  it, mu, f, feas, float(np.abs(grad_l).max(initial=0.0)),
                  max(float(comp_l.max(initial=0.0)), float(comp_u.max(initial=0.0))), delta_last)
        if err0 <= tol:
            status = CONVERGED
            break
        if it == max_iter:
            break
        s_d = max(100.0, (np.abs(y).sum() + zl.sum() + zu.sum()) / max(1, m + nw)) / 100.0
        s_c = max(100.0, (zl.sum() + zu.sum()) / max(1, nw)) / 100.0
        while True:
            err_mu = max(float(np.abs(grad_l).max(initial=0.0)) / s_d, feas,
                         float(np.abs(np.where(has_l, comp_l - mu, 0.0)).max(initial=0.0)) / s_c,
                         float(np.abs(np.where(has_u, comp_u - mu, 0.0)).max(initial=0.0)) / s_c)
            if err_mu > opt.kappa_eps * mu or mu <= mu_min:
                break
            mu = max(mu_min, min(opt.kappa_mu * mu, mu ** opt.theta_mu))
            filt = []

        W = R.hess(x, y)
        sig = np.where(has_l, zl / sl, 0.0) + np.where(has_u, zu / su, 0.0)
        grad_phi = g - np.where(has_l, mu / sl, 0.0) + np.where(has_u, mu / su, 0.0)
        rhs = -np.concatenate([grad_phi + J.T @ y, c])

        K = np.zeros((nw + m, nw + m))
        K[:nw, :nw] = W
        K[nw:, :nw] = J
        K[:nw, nw:] = J.T
        diag_idx = np.arange(nw)
        K[diag_idx, diag_idx] += sig
        delta_w, delta_c = 0.0, 0.0
        ok, fac, nzero = _factor(K, nw, m)
        if not ok and nzero and m:
            delta_c = 1e-8 * mu ** 0.25
            K[nw + np.arange(m), nw + np.arange(m)] -= delta_c
            ok, fac, nzero = _factor(K, nw, m)
        if not ok:
            delta_w = opt.delta_first if delta_last == 0.0 else max(opt.delta_first, delta_last / 3.0)
            while True:
                K[diag_idx, diag_idx] += delta_w
                ok, fac, _ = _factor(K, nw, m)
                K[diag_idx, diag_idx] -= delta_w
                if ok or delta_w >= opt.delta_max:
                    break
                delta_w = min(delta_w * opt.delta_growth, opt.delta_max)
            K[diag_idx, diag_idx] += delta_w
            delta_last = delta_w
            if not ok:
                log.debug("inertia correction hit the cap at iteration %d", it)
        sol = _solve_factored(fac, rhs)
        dw = sol[:nw]
        dy = sol[nw:]
        if not np.all(np.isfinite(sol)):
            status, message = INFEASIBLE, "non-finite Newton step"
            break
        dzl = np.where(has_l, (mu - zl * dw) / np.where(has_l, sl, 1.0) - zl, 0.0)
        dzu = np.where(has_u, (mu + zu * dw) / np.where(has_u, su, 1.0) - zu, 0.0)

        tau = max(opt.tau_min, 1.0 - mu)
        alpha_max = _frac_to_boundary(w, dw, lw, uw, has_l, has_u, tau)
        alpha_z = min(_dual_frac(zl[has_l], dzl[has_l], tau), _dual_frac(zu[has_u], dzu[has_u], tau))

        phi = barrier(w, f)
        theta = float(np.abs(c).sum())
        dphi = float(grad_phi @ dw)
        alpha = alpha_max
        accepted = False
        w_t = f_t = c_t = x_t = None
        for _ in range(opt.max_backtracks):
            w_t = w + alpha * dw
            x_t = R.full_x(w_t)
            f_t = float(instance.objective(x_t))
            c_t = R.cons(w_t, x_t)
            if not (np.isfinite(f_t) and np.all(np.isfinite(c_t))):
                alpha *= 0.5
                continue
            theta_t = float(np.abs(c_t).sum())
            phi_t = barrier(w_t, f_t)
            if theta_t <= theta_max and all(theta_t < tf or phi_t < pf for tf, pf in filt):
                switching = (theta <= theta_min and dphi < 0
                             and alpha * (-dphi) ** 2.3 > theta ** 1.1)
                if switching:
                    if phi_t <= phi + 1e-4 * alpha * dphi:
                        accepted = True
                        break
                elif theta_t <= (1 - 1e-5) * theta or phi_t <= phi - 1e-5 * theta:
                    accepted = True
                    filt.append(((1 - 1e-5) * theta, phi - 1e-5 * theta))
                    break
            alpha *= 0.5
        if not accepted:
            # no acceptable point along the direction: take the shortest finite trial
            filt = []
            if w_t is None or not np.isfinite(f_t):
                status, message = INFEASIBLE, "line search produced no finite point"
                break
        w, x, f, c = w_t, x_t, f_t, c_t
        y = y + alpha * dy
        zl = np.where(has_l, zl + alpha_z * dzl, 0.0)
        zu = np.where(has_u, zu + alpha_z * dzu, 0.0)
        sl, su = slacks(w)
        k_sig = 1e10
        zl = np.where(has_l, np.clip(zl, mu / (k_sig * sl), k_sig * mu / sl), 0.0)
        zu = np.where(has_u, np.clip(zu, mu / (k_sig * su), k_sig * mu / su), 0.0)

    point = R.expand(w, y, zl, zu)
    point.iterations = it
    point.objective = f
    point.status = status
    point.message = message
    point.kkt_residual = kkt_residual(instance, point) if status != INFEASIBLE else math.inf
    if status == CONVERGED and point.kkt_residual > tol:
        # reduced-space test passed but the original-space residual did not
        point.status = MAX_ITER
        point.message = f"residual {point.kkt_residual:.3e} above tol after reduction"
    return point


def _ls_multipliers(R: _Reduced, x, g_eff):
    J = R.jac(x)
    m = J.shape[0]
    try:
        y, *_ = np.linalg.lstsq(J.T, -g_eff, rcond=None)
    except np.linalg.LinAlgError:
        return np.zeros(m)
    if not np.all(np.isfinite(y)) or np.abs(y).max(initial=0.0) > 1e3:
        return np.zeros(m)
    return y


def _reduce_eq_multipliers(R: _Reduced, warm: KktPoint):
    y = np.zeros(R.m)
    y[:R.m_nl] = warm.eq_multipliers
    r = R.m_nl
    y[r:r + R.eq_rows.size] = warm.lin_multipliers[R.eq_rows]
    r += R.eq_rows.size
    y[r:] = warm.lin_multipliers[R.in_rows]
    return y


# ---------------------------------------------------------------------------
# derivative checking
# ---------------------------------------------------------------------------

def _rel_err(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def check_derivatives(instance: NlpInstance, point, fd_step: float = 1e-6,
                      multipliers=None, threshold: float = 1e-5) -> DerivativeReport:
    """Compare analytic derivatives against central finite differences.

    Errors are ``|analytic - fd| / max(1, |analytic|, |fd|)`` per entry. When
    ``multipliers`` is given the Lagrangian Hessian is checked as well, against
    differences of ``grad f + J^T multipliers``.
    """
    x = np.asarray(point, dtype=float)
    n = instance.n_vars
    g = instance.gradient(x)
    J = instance.eval_jacobian(x)
    g_fd = np.zeros(n)
    J_fd = np.zeros_like(J)
    H_fd = None
    if multipliers is not None:
        mult = np.asarray(multipliers, dtype=float)
        H = instance.lagrangian_hessian(x, mult)
        H_fd = np.zeros((n, n))

        def lag_grad(z):
            out = instance.gradient(z)
            if instance.n_eq:
                out = out + instance.eval_jacobian(z).T @ mult
            return out
    for k in range(n):
        e = np.zeros(n)
        e[k] = fd_step
        g_fd[k] = (instance.objective(x + e) - instance.objective(x - e)) / (2 * fd_step)
        if instance.n_eq:
            J_fd[:, k] = (instance.eval_constraints(x + e) - instance.eval_constraints(x - e)) / (2 * fd_step)
        if H_fd is not None:
            H_fd[:, k] = (lag_grad(x + e) - lag_grad(x - e)) / (2 * fd_step)
    g_err = _rel_err(g, g_fd)
    J_err = _rel_err(J, J_fd)
    H_err = _rel_err(H, H_fd) if H_fd is not None else None
    flagged = [("gradient", (int(i),)) for i in np.flatnonzero(g_err > threshold)]
    flagged += [("jacobian", (int(i), int(j))) for i, j in zip(*np.nonzero(J_err > threshold))]
    if H_err is not None:
        flagged += [("hessian", (int(i), int(j))) for i, j in zip(*np.nonzero(H_err > threshold))]
    return DerivativeReport(g_err, J_err, H_err, threshold, flagged)
