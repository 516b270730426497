"""Hot numeric kernels.

Every kernel exists twice: an explicit-loop version compiled with numba and a
vectorized numpy version. ``DEMPC_NUMBA=0`` selects the numpy path at import.
Both paths are exported (``loop`` / ``vectorized``) so tests and the benchmark
can compare them directly.

Admittances enter as separate real arrays ``G`` and ``B`` (``Y = G + jB``).
Derivative blocks are ordered ``[magnitude; angle]`` along columns and
``[P; Q]`` along rows.
"""

from types import SimpleNamespace

import numpy as np

from ._jit import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# loop kernels (numba)
# ---------------------------------------------------------------------------

@njit
def _injections_loop(vm, va, G, B):
    n = vm.shape[0]
    p = np.zeros(n)
    q = np.zeros(n)
    for i in range(n):
        sp = 0.0
        sq = 0.0
        for j in range(n):
            g = G[i, j]
            b = B[i, j]
            if g == 0.0 and b == 0.0:
                continue
            th = va[i] - va[j]
            c = np.cos(th)
            s = np.sin(th)
            sp += vm[j] * (g * c + b * s)
            sq += vm[j] * (g * s - b * c)
        p[i] = vm[i] * sp
        q[i] = vm[i] * sq
    return p, q


@njit
def _jacobian_loop(vm, va, G, B):
    n = vm.shape[0]
    J = np.zeros((2 * n, 2 * n))
    for i in range(n):
        for j in range(n):
            g = G[i, j]
            b = B[i, j]
            if g == 0.0 and b == 0.0:
                continue
            if i == j:
                J[i, i] += 2.0 * vm[i] * g
                J[n + i, i] += -2.0 * vm[i] * b
                continue
            th = va[i] - va[j]
            c = np.cos(th)
            s = np.sin(th)
            a_ij = g * c + b * s
            b_ij = g * s - b * c
            J[i, j] = vm[i] * a_ij
            J[i, n + j] = vm[i] * vm[j] * b_ij
            J[n + i, j] = vm[i] * b_ij
            J[n + i, n + j] = -vm[i] * vm[j] * a_ij
            J[i, i] += vm[j] * a_ij
            J[i, n + i] -= vm[i] * vm[j] * b_ij
            J[n + i, i] += vm[j] * b_ij
            J[n + i, n + i] += vm[i] * vm[j] * a_ij
    return J


@njit
def _hessian_loop(vm, va, G, B, lp, lq):
    n = vm.shape[0]
    H = np.zeros((2 * n, 2 * n))
    for i in range(n):
        if lp[i] == 0.0 and lq[i] == 0.0:
            continue
        for j in range(n):
            g = G[i, j]
            b = B[i, j]
            if g == 0.0 and b == 0.0:
                continue
            if i == j:
                H[i, i] += 2.0 * (lp[i] * g - lq[i] * b)
                continue
            th = va[i] - va[j]
            c = np.cos(th)
            s = np.sin(th)
            a_ij = g * c + b * s
            b_ij = g * s - b * c
            w = lp[i] * a_ij + lq[i] * b_ij
            wp = -lp[i] * b_ij + lq[i] * a_ij
            ti = n + i
            tj = n + j
            vivj = vm[i] * vm[j]
            H[i, j] += w
            H[j, i] += w
            H[i, ti] += vm[j] * wp
            H[ti, i] += vm[j] * wp
            H[i, tj] -= vm[j] * wp
            H[tj, i] -= vm[j] * wp
            H[j, ti] += vm[i] * wp
            H[ti, j] += vm[i] * wp
            H[j, tj] -= vm[i] * wp
            H[tj, j] -= vm[i] * wp
            H[ti, ti] -= vivj * w
            H[tj, tj] -= vivj * w
            H[ti, tj] += vivj * w
            H[tj, ti] += vivj * w
    return H


@njit
def _inertia_loop(lu, ipiv, zero_tol):
    n = lu.shape[0]
    npos = 0
    nneg = 0
    nzero = 0
    k = 0
    while k < n:
        if ipiv[k] > 0:
            d = lu[k, k]
            if abs(d) <= zero_tol:
                nzero += 1
            elif d > 0.0:
                npos += 1
            else:
                nneg += 1
            k += 1
        else:
            a = lu[k, k]
            b = lu[k + 1, k]
            c = lu[k + 1, k + 1]
            half = 0.5 * (a + c)
            rad = np.sqrt(0.25 * (a - c) * (a - c) + b * b)
            for e in (half + rad, half - rad):
                if abs(e) <= zero_tol:
                    nzero += 1
                elif e > 0.0:
                    npos += 1
                else:
                    nneg += 1
            k += 2
    return npos, nneg, nzero


# ---------------------------------------------------------------------------
# vectorized kernels (numpy)
# ---------------------------------------------------------------------------

def _injections_np(vm, va, G, B):
    V = vm * np.exp(1j * va)
    S = V * np.conj((G + 1j * B) @ V)
    return S.real.copy(), S.imag.copy()


def _jacobian_np(vm, va, G, B):
    Y = G + 1j * B
    V = vm * np.exp(1j * va)
    I = Y @ V
    dV = np.diag(V)
    dS_dva = 1j * dV @ np.conj(np.diag(I) - Y * V[None, :])
    Vn = V / vm
    dS_dvm = dV @ np.conj(Y * Vn[None, :]) + np.diag(np.conj(I) * Vn)
    top = np.hstack([dS_dvm.real, dS_dva.real])
    bot = np.hstack([dS_dvm.imag, dS_dva.imag])
    return np.vstack([top, bot])


def _complex_hessian_blocks(Y, V, lam):
    # second derivatives of lam^T S(V) in polar coordinates (complex lam)
    I = Y @ V
    A = np.diag(lam * V)
    Bm = Y * V[None, :]
    C = A @ np.conj(Bm)
    D = Y.conj().T * V[None, :]
    E = np.diag(np.conj(V)) @ (D * lam[None, :] - np.diag(D @ lam))
    F = C - A @ np.diag(np.conj(I))
    Gi = np.diag(1.0 / np.abs(V))
    Gaa = E + F
    Gva = 1j * Gi @ (E - F)
    Gav = Gva.T
    Gvv = Gi @ (C + C.T) @ Gi
    return Gaa, Gav, Gva, Gvv


def _hessian_np(vm, va, G, B, lp, lq):
    Y = G + 1j * B
    V = vm * np.exp(1j * va)
    Paa, Pav, Pva, Pvv = _complex_hessian_blocks(Y, V, lp.astype(complex))
    Qaa, Qav, Qva, Qvv = _complex_hessian_blocks(Y, V, lq.astype(complex))
    Haa = Paa.real + Qaa.imag
    Hav = Pav.real + Qav.imag
    Hva = Pva.real + Qva.imag
    Hvv = Pvv.real + Qvv.imag
    H = np.block([[Hvv, Hva], [Hav, Haa]])
    return 0.5 * (H + H.T)


def _inertia_np(lu, ipiv, zero_tol):
    n = lu.shape[0]
    ev = []
    k = 0
    while k < n:
        if ipiv[k] > 0:
            ev.append(lu[k, k])
            k += 1
        else:
            blk = np.array([[lu[k, k], lu[k + 1, k]], [lu[k + 1, k], lu[k + 1, k + 1]]])
            ev.extend(np.linalg.eigvalsh(blk))
            k += 2
    ev = np.asarray(ev)
    nzero = int(np.count_nonzero(np.abs(ev) <= zero_tol))
    npos = int(np.count_nonzero(ev > zero_tol))
    return npos, n - npos - nzero, nzero


loop = SimpleNamespace(
    injections=_injections_loop,
    jacobian=_jacobian_loop,
    hessian=_hessian_loop,
    inertia=_inertia_loop,
)
vectorized = SimpleNamespace(
    injections=_injections_np,
    jacobian=_jacobian_np,
    hessian=_hessian_np,
    inertia=_inertia_np,
)

_active = loop if USE_NUMBA else vectorized
backend = "numba" if USE_NUMBA else "numpy"

injections = _active.injections
jacobian = _active.jacobian
hessian = _active.hessian
inertia = _active.inertia
