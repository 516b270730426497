import numpy as np
import pytest
from hypothesis import given, strategies as st

from dempc.aladin import AladinConfig, Partition
from dempc.empc import HorizonConfig, assemble_empc
from dempc.errors import InputError
from dempc.nlp import solve_nlp
from dempc.profiles import DayProfile
from dempc.sim import (SimConfig, compute_metrics, cost_deviation_pct, integrate_state, run_mpc,
                       shift_solution)

from toy import chain, chain_forecasts, two_bus, two_bus_fleet


def _flat(n):
    return np.ones(n), np.zeros(n)


def test_balanced_bus_keeps_its_state():
    net = two_bus(x_bound=1.0, b=0.0)
    fleet = two_bus_fleet()
    vm, va = _flat(2)
    # no flow at a flat profile; generation equals demand at the load bus only if both are zero
    x, imb = integrate_state(np.array([0.2, -0.1]), net, fleet, [0.0], np.zeros(0), vm, va,
                             np.zeros(0), [0.0], 1 / 12)
    assert np.array_equal(x, [0.2, -0.1]) and np.all(imb == 0)


def test_unserved_demand_drains_the_bus():
    net = two_bus(x_bound=1.0)
    fleet = two_bus_fleet()
    vm, va = _flat(2)
    x, imb = integrate_state(np.zeros(2), net, fleet, [0.0], np.zeros(0), vm, va, np.zeros(0), [0.1], 1 / 12)
    assert x == pytest.approx([0.0, -0.1 / 12], abs=1e-15)
    assert np.all(imb == 0)


def test_clamping_is_logged():
    net = two_bus(x_bound=0.005)
    fleet = two_bus_fleet()
    vm, va = _flat(2)
    x, imb = integrate_state(np.zeros(2), net, fleet, [0.0], np.zeros(0), vm, va, np.zeros(0), [0.12], 1 / 12)
    assert x[1] == -0.005
    assert imb[1] == pytest.approx(-0.01 + 0.005)
    with pytest.raises(InputError):
        integrate_state(np.zeros(3), net, fleet, [0.0], np.zeros(0), vm, va, np.zeros(0), [0.1], 1 / 12)


@given(st.integers(0, 1000), st.floats(-0.5, 0.5))
def test_state_change_is_dt_times_imbalance(seed, shift):
    net, fleet = chain(5, x_bound=10.0)
    rng = np.random.default_rng(seed)
    vm = 0.95 + 0.1 * rng.random(5)
    va = 0.05 * rng.standard_normal(5) + shift
    pg, pvg = rng.random(2), 0.05 * rng.random(3)
    pgs, pds = 0.05 * rng.random(1), 0.2 * rng.random(3)
    x, imb = integrate_state(np.zeros(5), net, fleet, pg, pvg, vm, va, pgs, pds, 0.25)
    from dempc.powerflow import VoltageState, injections
    loss = injections(VoltageState(vm, va), net.admittance).p_inj.sum()
    assert x.sum() == pytest.approx(0.25 * (pg.sum() + pvg.sum() + pgs.sum() - pds.sum() - loss), abs=1e-12)
    assert np.all(imb == 0)


def test_shift_drops_first_step_and_repeats_last():
    net, fleet = chain(4)
    P = assemble_empc(net, fleet, chain_forecasts(fleet, 3), HorizonConfig(steps=3), x0=np.zeros(4))
    z = np.arange(P.n_vars, dtype=float)
    m = P.layout.per_step
    s = shift_solution(P, z)
    assert np.array_equal(s[:2 * m], z[m:]) and np.array_equal(s[2 * m:], z[2 * m:])


def test_cost_deviation():
    assert cost_deviation_pct(100.0, 100.05)[0] == pytest.approx(0.05)
    assert cost_deviation_pct([200.0], [199.9])[0] == pytest.approx(0.05)
    # zero centralized cost reports the absolute gap instead of dividing by zero
    assert cost_deviation_pct(0.0, 3e-7)[0] == pytest.approx(3e-7)


def _toy_day(fleet, steps, seed=0):
    fc = chain_forecasts(fleet, steps, seed)
    return DayProfile(fc, fc)


def test_realized_state_matches_the_plan_under_perfect_forecasts():
    net, fleet = chain(5)
    day = _toy_day(fleet, 6)
    cfg = SimConfig(horizon=HorizonConfig(steps=3))
    res = run_mpc(net, fleet, None, day, "centralized", config=cfg, n_intervals=3)
    x = np.zeros(5)
    prev = None
    for t, s in enumerate(res.steps):
        P = assemble_empc(net, fleet, day.window(t, 3), cfg.horizon, x0=x, p_gc_prev=prev)
        k = solve_nlp(P.to_nlp(), P.flat_start(), tol=1e-10)
        planned = P.unpack(k.primal)["x"][0]
        assert np.allclose(s.x, planned, atol=1e-8)
        assert np.all(s.imbalance == 0)
        x, prev = s.x, s.p_gc


def test_applied_dispatch_respects_ramps_and_conserves_energy():
    net, fleet = chain(5)
    day = _toy_day(fleet, 10, seed=3)
    res = run_mpc(net, fleet, None, day, "centralized", config=SimConfig(horizon=HorizonConfig(steps=4)))
    pg = res.series("p_gc")
    dt = res.dt
    step = np.diff(pg, axis=0)
    assert np.all(np.abs(step[:, 0]) <= 6 * dt + 1e-8) and np.all(np.abs(step[:, 1]) <= 3 * dt + 1e-8)
    m = compute_metrics(res)
    assert abs(m["energy_residual"]) <= 1e-12
    assert m["failures"] == []


def test_warm_start_saves_iterations():
    net, fleet = chain(5)
    day = _toy_day(fleet, 8, seed=1)
    h = HorizonConfig(steps=4)
    warm = run_mpc(net, fleet, None, day, "centralized", config=SimConfig(horizon=h))
    cold = run_mpc(net, fleet, None, day, "centralized", config=SimConfig(horizon=h, warm_start=False))
    assert warm.series("nlp_iterations")[1:].sum() < cold.series("nlp_iterations")[1:].sum()
    assert np.allclose(warm.series("objective_cent"), cold.series("objective_cent"), rtol=1e-6)


def test_both_mode_reports_deviation_and_consensus():
    net, fleet = chain(6)
    part = Partition.from_areas(net, [[0, 1, 2], [3, 4, 5]])
    day = _toy_day(fleet, 4, seed=2)
    cfg = SimConfig(horizon=HorizonConfig(steps=2), aladin=AladinConfig(tol=1e-6))
    res = run_mpc(net, fleet, part, day, "both", config=cfg)
    m = compute_metrics(res)
    assert m["max_deviation_pct"] <= 1e-3
    assert np.all(m["boundary_mismatch"] <= 1e-6)
    assert np.all(m["generation_gap_frac_of_peak"] <= 1e-3)
    assert res.table().count("\n") == 5


def test_mode_and_partition_errors():
    net, fleet = chain(4)
    day = _toy_day(fleet, 2)
    with pytest.raises(InputError):
        run_mpc(net, fleet, None, day, "fast")
    with pytest.raises(InputError):
        run_mpc(net, fleet, None, day, "distributed")
    with pytest.raises(InputError):
        run_mpc(net, fleet, None, day, "centralized", config=SimConfig(horizon=HorizonConfig(steps=2, dt=0.5)))
