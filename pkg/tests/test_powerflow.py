import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dempc import kernels
from dempc.grid import build_admittance
from dempc.powerflow import (VoltageState, injection_hessian_contraction, injection_jacobian,
                             injections)

from toy import chain, three_bus, two_bus


def injections_by_definition(vm, va, Y):
    """S_i = V_i * conj(sum_j Y_ij V_j), one bus at a time."""
    n = len(vm)
    V = [vm[i] * complex(np.cos(va[i]), np.sin(va[i])) for i in range(n)]
    S = [V[i] * sum(Y[i, j] * V[j] for j in range(n)).conjugate() for i in range(n)]
    return np.array([s.real for s in S]), np.array([s.imag for s in S])


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    return VoltageState(0.9 + 0.2 * rng.random(n), 0.3 * rng.standard_normal(n))


def test_flat_start_without_shunts_injects_nothing():
    Y = build_admittance(two_bus())
    r = injections(VoltageState.flat(2), Y)
    assert np.allclose(r.p_inj, 0) and np.allclose(r.q_inj, 0)


def test_two_bus_flow_by_hand():
    # V0 = 1, V1 = 0.98 at -0.05 rad across z = 0.01 + 0.1j
    Y = build_admittance(two_bus())
    v = VoltageState(np.array([1.0, 0.98]), np.array([0.0, -0.05]))
    V0, V1 = 1.0, 0.98 * np.exp(-0.05j)
    I01 = (V0 - V1) / complex(0.01, 0.1)
    S0 = V0 * np.conj(I01)
    S1 = V1 * np.conj(-I01)
    r = injections(v, Y)
    assert r.p_inj == pytest.approx([S0.real, S1.real], rel=1e-12)
    assert r.q_inj == pytest.approx([S0.imag, S1.imag], rel=1e-12)
    # series loss |I|^2 r
    assert r.p_inj.sum() == pytest.approx(abs(I01) ** 2 * 0.01, rel=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_injections_match_definition(seed):
    net, _ = chain(6)
    Y = build_admittance(net)
    v = random_state(6, seed)
    p, q = injections_by_definition(v.magnitude, v.angle, Y)
    r = injections(v, Y)
    assert np.allclose(r.p_inj, p, atol=1e-12) and np.allclose(r.q_inj, q, atol=1e-12)


def _fd_jacobian(v, Y, h=1e-7):
    n = v.magnitude.size
    x = np.concatenate([v.magnitude, v.angle])
    J = np.zeros((2 * n, 2 * n))
    for k in range(2 * n):
        e = np.zeros(2 * n)
        e[k] = h
        plus = injections_by_definition((x + e)[:n], (x + e)[n:], Y)
        minus = injections_by_definition((x - e)[:n], (x - e)[n:], Y)
        J[:, k] = (np.concatenate(plus) - np.concatenate(minus)) / (2 * h)
    return J


@pytest.mark.parametrize("seed", range(3))
def test_jacobian_against_differences(seed):
    Y = build_admittance(three_bus())
    v = random_state(3, seed)
    assert np.allclose(injection_jacobian(v, Y), _fd_jacobian(v, Y), atol=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_hessian_contraction_against_differences(seed):
    net, _ = chain(4)
    Y = build_admittance(net)
    v = random_state(4, seed)
    rng = np.random.default_rng(100 + seed)
    lp, lq = rng.standard_normal(4), rng.standard_normal(4)
    H = injection_hessian_contraction(v, Y, lp, lq)
    h = 1e-6
    x = np.concatenate([v.magnitude, v.angle])
    H_fd = np.zeros_like(H)
    for k in range(8):
        e = np.zeros(8)
        e[k] = h
        Jp = injection_jacobian(VoltageState((x + e)[:4], (x + e)[4:]), Y)
        Jm = injection_jacobian(VoltageState((x - e)[:4], (x - e)[4:]), Y)
        H_fd[:, k] = (np.concatenate([lp, lq]) @ (Jp - Jm)) / (2 * h)
    assert np.allclose(H, H.T)
    assert np.allclose(H, H_fd, atol=1e-6)


def test_bad_inputs():
    with pytest.raises(ValueError):
        VoltageState(np.array([1.0, -1.0]), np.zeros(2))
    with pytest.raises(ValueError):
        injections(VoltageState.flat(3), np.eye(2))


@given(arrays(float, 5, elements=st.floats(0.8, 1.2)), arrays(float, 5, elements=st.floats(-0.6, 0.6)),
       st.floats(-np.pi, np.pi))
def test_injections_invariant_under_common_rotation(vm, va, shift):
    net, _ = chain(5)
    Y = build_admittance(net)
    a = injections(VoltageState(vm, va), Y)
    b = injections(VoltageState(vm, va + shift), Y)
    assert np.allclose(a.p_inj, b.p_inj, atol=1e-10) and np.allclose(a.q_inj, b.q_inj, atol=1e-10)


@given(arrays(float, 5, elements=st.floats(0.8, 1.2)), arrays(float, 5, elements=st.floats(-0.6, 0.6)))
def test_series_losses_nonnegative(vm, va):
    net, _ = chain(5)
    from dataclasses import replace
    net = replace(net, branches=tuple(replace(b, b=0.0) for b in net.branches))
    p = injections(VoltageState(vm, va), build_admittance(net)).p_inj
    assert p.sum() >= -1e-12


@given(arrays(float, 4, elements=st.floats(0.8, 1.2)), arrays(float, 4, elements=st.floats(-0.6, 0.6)),
       arrays(float, 4, elements=st.floats(-2, 2)), arrays(float, 4, elements=st.floats(-2, 2)))
def test_backends_agree(vm, va, lp, lq):
    net, _ = chain(4)
    Y = build_admittance(net)
    G, B = np.ascontiguousarray(Y.real), np.ascontiguousarray(Y.imag)
    for name in ("injections", "jacobian"):
        a = getattr(kernels.loop, name)(vm, va, G, B)
        b = getattr(kernels.vectorized, name)(vm, va, G, B)
        assert np.allclose(np.asarray(a), np.asarray(b), atol=1e-10)
    assert np.allclose(kernels.loop.hessian(vm, va, G, B, lp, lq),
                       kernels.vectorized.hessian(vm, va, G, B, lp, lq), atol=1e-10)
