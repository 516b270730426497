"""Complex power injections ``S = diag(V) conj(Y) conj(V)`` in polar coordinates,
with analytic first and second derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class VoltageState:
    magnitude: np.ndarray
    angle: np.ndarray

    def __post_init__(self):
        vm = np.asarray(self.magnitude, dtype=float)
        va = np.asarray(self.angle, dtype=float)
        if vm.shape != va.shape or vm.ndim != 1:
            raise ValueError("magnitude and angle must be 1-d arrays of equal length")
        if np.any(vm <= 0):
            raise ValueError("voltage magnitudes must be positive")
        object.__setattr__(self, "magnitude", vm)
        object.__setattr__(self, "angle", va)

    @classmethod
    def flat(cls, n: int) -> "VoltageState":
        return cls(np.ones(n), np.zeros(n))

    @property
    def phasor(self) -> np.ndarray:
        return self.magnitude * np.exp(1j * self.angle)


@dataclass(frozen=True)
class InjectionResult:
    p_inj: np.ndarray
    q_inj: np.ndarray
    jacobian: np.ndarray | None = None


def _split(v: VoltageState, y):
    y = np.asarray(y)
    n = v.magnitude.shape[0]
    if y.shape != (n, n):
        raise ValueError(f"admittance shape {y.shape} does not match {n} buses")
    return v.magnitude, v.angle, np.ascontiguousarray(y.real), np.ascontiguousarray(y.imag)


def injections(v: VoltageState, y) -> InjectionResult:
    vm, va, G, B = _split(v, y)
    p, q = kernels.injections(vm, va, G, B)
    return InjectionResult(p, q)


def injection_jacobian(v: VoltageState, y) -> np.ndarray:
    """``d[P; Q] / d[magnitude; angle]`` as a dense ``2n x 2n`` matrix."""
    vm, va, G, B = _split(v, y)
    return kernels.jacobian(vm, va, G, B)


def injection_hessian_contraction(v: VoltageState, y, mult_p, mult_q) -> np.ndarray:
    """``sum_b mult_p[b] * hess(P_b) + mult_q[b] * hess(Q_b)`` over ``[magnitude; angle]``."""
    vm, va, G, B = _split(v, y)
    lp = np.asarray(mult_p, dtype=float)
    lq = np.asarray(mult_q, dtype=float)
    if lp.shape != vm.shape or lq.shape != vm.shape:
        raise ValueError("multiplier vectors must have one entry per bus")
    return kernels.hessian(vm, va, G, B, lp, lq)
