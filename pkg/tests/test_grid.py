import numpy as np
import pytest
from hypothesis import given, strategies as st

from dempc.errors import InputError, StructuralError
from dempc.grid import (Branch, Bus, DeviceFleet, FlexLoad, Generator, Load, Network, branch_admittance,
                        build_admittance, build_incidence, validate_network)

from toy import chain, two_bus


def test_two_bus_admittance_by_hand():
    net = two_bus(r=0.01, x=0.1, b=0.02)
    Y = build_admittance(net)
    ys = 1.0 / complex(0.01, 0.1)  # 0.990099 - 9.90099j
    assert Y[0, 1] == pytest.approx(-ys)
    assert Y[1, 0] == pytest.approx(-ys)
    assert Y[0, 0] == pytest.approx(ys + 0.01j)
    assert Y[0, 0].real == pytest.approx(0.99009901, rel=1e-7)
    assert Y[0, 0].imag == pytest.approx(-9.90099010 + 0.01, rel=1e-7)


def test_parallel_branches_add():
    buses = (Bus(0, is_reference=True), Bus(1))
    single = Network(buses, (Branch(0, 1, 0.02, 0.2),))
    double = Network(buses, (Branch(0, 1, 0.04, 0.4), Branch(0, 1, 0.04, 0.4)))
    assert np.allclose(build_admittance(single), build_admittance(double))


def test_branch_admittance_matches_two_bus_network():
    br = Branch(0, 1, 0.03, 0.07, b=0.05)
    net = Network((Bus(0, is_reference=True), Bus(1)), (br,))
    assert np.allclose(branch_admittance(br), build_admittance(net))


def test_zero_impedance_rejected():
    net = Network((Bus(0, is_reference=True), Bus(1)), (Branch(0, 1, 0.0, 0.0),))
    with pytest.raises(InputError):
        build_admittance(net)
    assert any("zero series impedance" in d for d in validate_network(net))


def test_disconnected_network():
    net = Network((Bus(0, is_reference=True), Bus(1), Bus(2)), (Branch(0, 1, 0.01, 0.1),))
    with pytest.raises(StructuralError):
        build_admittance(net)
    assert "network graph is disconnected" in validate_network(net)
    assert build_admittance(net, require_connected=False)[2, 2] == 0


def test_validation_diagnostics():
    net = Network((Bus(0), Bus(1, v_min=1.2, v_max=1.0), Bus(2, x_min=0.1, x_max=0.2)),
                  (Branch(0, 1, 0.01, 0.1), Branch(1, 2, 0.01, 0.1), Branch(2, 5, 0.01, 0.1)))
    diags = validate_network(net)
    assert any("reference" in d for d in diags)
    assert any("bus 1: voltage bounds" in d for d in diags)
    assert any("bus 2: storage bounds" in d for d in diags)
    assert any("missing bus" in d for d in diags)


def test_fleet_diagnostics():
    net = two_bus()
    fleet = DeviceFleet(gc=(Generator(0, p_min=1.0, p_max=0.5, r_min=1.0, r_max=2.0),),
                        ds=(Load(7),), dc=(FlexLoad(1, capacity_fraction=1.5),))
    diags = validate_network(net, fleet)
    assert any("p_min > p_max" in d for d in diags)
    assert any("ramp bounds" in d for d in diags)
    assert any("missing bus 7" in d for d in diags)
    assert any("capacity_fraction" in d for d in diags)


def test_lebanon_case_is_valid():
    from dempc.cases import lebanon_case
    case = lebanon_case()
    assert validate_network(case.network, case.fleet) == []
    assert case.network.n_bus == 13
    assert case.network.reference == 0


def test_incidence_columns():
    net, fleet = chain(5)
    inc = build_incidence(fleet, net)
    assert inc.gc.shape == (5, 2) and inc.ds.shape == (5, 3)
    assert np.array_equal(inc.gc.sum(axis=0), np.ones(2))
    assert inc.gc[0, 0] == 1 and inc.gc[4, 1] == 1
    assert np.array_equal(np.flatnonzero(inc.dc.sum(axis=1)), [1, 2, 3])


@st.composite
def radial_networks(draw):
    n = draw(st.integers(2, 8))
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    imp = st.floats(1e-3, 0.5)
    branches = tuple(Branch(p, i, draw(imp), draw(imp), draw(st.floats(0, 0.1)))
                     for i, p in zip(range(1, n), parents))
    buses = tuple(Bus(i, is_reference=(i == 0)) for i in range(n))
    return Network(buses, branches)


@given(radial_networks())
def test_admittance_symmetric_and_series_rows_sum_to_shunt(net):
    Y = build_admittance(net)
    assert np.allclose(Y, Y.T)
    # row sums leave only the charging half-susceptances
    shunt = np.zeros(net.n_bus, dtype=complex)
    for br in net.branches:
        shunt[br.from_bus] += 0.5j * br.b
        shunt[br.to_bus] += 0.5j * br.b
    assert np.allclose(Y.sum(axis=1), shunt, atol=1e-9)


@given(radial_networks())
def test_radial_networks_validate(net):
    assert validate_network(net) == []
    assert net.is_connected()
