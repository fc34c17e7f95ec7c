import numpy as np
import pytest

from dcstab.components import (BuckConverterModel, Compensator, LeadLag,
                               LineModel, PlantPILoad, SourceModel)
from dcstab.network import (Bus, Edge, NetworkGraph, NetworkError)

TWO_PI = 2.0 * np.pi


def buck(V=29.0, Cf=500e-6):
    comp = Compensator(LeadLag(Gc_inf=3.7, wL=TWO_PI * 500, wz=TWO_PI * 1700,
                               wp=TWO_PI * 14.5e3))
    return BuckConverterModel(V=V, R=3.0, L=50e-6, C=500e-6, D=0.536,
                              H=1 / 3, Vm=4.0, compensator=comp, Cf=Cf)


def two_bus_net(Rs=0.5, Rl=0.5, tau=0.1, load=None):
    load = load or PlantPILoad(wn=TWO_PI, zeta=0.1, K=20.77, tau_i=0.25)
    buses = [Bus(1, "source", SourceModel(V_set=30.0, line=LineModel.from_tau(Rs, tau)), "src"),
             Bus(2, "load", load, "load")]
    return NetworkGraph(buses, [Edge(1, 2, LineModel.from_tau(Rl, tau))])


def test_assemble_two_bus_block_structure():
    net = two_bus_net()
    s = 0.7 + 2.3j
    Y = net.assemble(s, 1.0)
    ys = net.buses[0].device.admittance()(s)
    yl = net.edges[0].line.admittance()(s)
    yL = net.buses[1].device.rational_admittance(1.0)(s)
    want = np.array([[ys + yl, -yl], [-yl, yL + yl]])
    assert Y == pytest.approx(want, rel=1e-12)


def test_assemble_single_bus():
    buses = [Bus(1, "source", SourceModel(V_set=30.0, line=LineModel.from_tau(0.5, 0.1)), "src")]
    net = NetworkGraph(buses, [])
    Y = net.assemble(2j, 0.0)
    assert Y.shape == (1, 1)
    assert Y[0, 0] == pytest.approx(net.buses[0].device.admittance()(2j))


def test_assemble_real_at_dc(radial10):
    Y = radial10.assemble(0.0, 1.0)
    assert np.max(np.abs(Y.imag)) == 0.0


def test_zero_row_sums_without_shunts(radial10):
    rng = np.random.default_rng(2)
    for _ in range(4):
        s = complex(rng.normal(), rng.normal()) * 1e3
        Y = radial10.assemble(s, 1.0)
        for k, bus in enumerate(radial10.buses):
            ysh = radial10.shunt_admittance(bus, 1.0)
            if ysh is not None:
                Y[k, k] -= ysh(s)
        sums = np.abs(Y.sum(axis=1))
        assert np.all(sums <= 1e-12 * np.max(np.abs(Y)))


def test_complex_symmetry(mesh8):
    rng = np.random.default_rng(3)
    for _ in range(3):
        s = complex(rng.normal(), rng.normal()) * 1e4
        Y = mesh8.assemble(s, 0.7)
        assert np.max(np.abs(Y - Y.T)) <= 1e-12 * np.max(np.abs(Y))


def test_steady_state_no_load_equals_source():
    buses = [Bus(1, "source", SourceModel(V_set=30.0, line=LineModel.from_tau(0.5, 1e-3)), "src"),
             Bus(2, "junction", None, ""),
             Bus(3, "junction", None, "")]
    edges = [Edge(1, 2, LineModel.from_tau(0.2, 1e-3)),
             Edge(2, 3, LineModel.from_tau(0.2, 1e-3))]
    ss = NetworkGraph(buses, edges).steady_state()
    assert ss.V0 == pytest.approx(np.full(3, 30.0))
    assert ss.I0 == pytest.approx(np.zeros(3), abs=1e-12)


def test_steady_state_two_bus_divider():
    # V2 = Vs * g_path / (g_path + g) with g_path = 1/(Rs + Rl)
    net = two_bus_net(Rs=0.4, Rl=0.6, load=buck())
    ss = net.steady_state()
    g = buck().D ** 2 / buck().R
    g_path = 1.0
    assert ss.V0[1] == pytest.approx(30.0 * g_path / (g_path + g), rel=1e-12)


def test_steady_state_radial_band_and_residual(radial10):
    ss = radial10.steady_state()
    loads = ss.V0[1:]
    assert np.all(loads >= 28.0) and np.all(loads <= 30.0)
    assert ss.residual <= 1e-10 * np.max(np.abs(ss.V0))


def test_steady_state_block_form_oracle(radial10):
    # Rebuild the partitioned DC system independently and compare.
    net = radial10
    src = [b for b in net.buses if b.kind == "source"]
    ns, n = len(src), net.n
    Yb = np.zeros((ns + n, ns + n))
    def stamp(a, b, g):
        Yb[a, a] += g; Yb[b, b] += g; Yb[a, b] -= g; Yb[b, a] -= g
    for k, b in enumerate(src):
        stamp(k, ns + net.pos(b.id), 1.0 / b.device.line.resistance)
    for e in net.edges:
        stamp(ns + net.pos(e.i), ns + net.pos(e.j), 1.0 / e.line.resistance)
    for k, b in enumerate(net.buses):
        if b.kind == "load":
            Yb[ns + k, ns + k] += b.device.D ** 2 / b.device.R
    Vs = np.array([b.device.V_set for b in src])
    Vl = np.linalg.solve(Yb[ns:, ns:], -Yb[ns:, :ns] @ Vs)
    ss = net.steady_state()
    assert ss.V0 == pytest.approx(Vl, rel=1e-12)
    resid = Yb[ns:, ns:] @ ss.V0 + Yb[ns:, :ns] @ Vs
    assert np.max(np.abs(resid)) <= 1e-10 * np.max(np.abs(ss.V0))


def test_resolved_sets_operating_voltage():
    net = two_bus_net(load=BuckConverterModel(
        V=float("nan"), R=3.0, L=50e-6, C=500e-6, D=0.536, H=1 / 3, Vm=4.0,
        compensator=Compensator(PI_dummy := LeadLag(3.7, TWO_PI * 500, TWO_PI * 1700, TWO_PI * 14.5e3)),
        Cf=500e-6))
    res = net.resolved()
    ss = net.steady_state()
    assert res.buses[1].device.V == pytest.approx(ss.V0[1])


def test_operating_band_enforced():
    load = BuckConverterModel(V=float("nan"), R=0.5, L=50e-6, C=500e-6,
                              D=0.9, H=1 / 3, Vm=4.0,
                              compensator=Compensator(LeadLag(3.7, TWO_PI * 500, TWO_PI * 1700, TWO_PI * 14.5e3)),
                              Cf=500e-6)
    buses = [Bus(1, "source", SourceModel(V_set=30.0, line=LineModel.from_tau(0.5, 1e-3)), "src"),
             Bus(2, "load", load, "load")]
    net = NetworkGraph(buses, [Edge(1, 2, LineModel.from_tau(0.5, 1e-3))],
                       operating_band=(28.0, 30.0))
    with pytest.raises(NetworkError):
        net.resolved()


def test_effective_admittance_two_bus_series():
    net = two_bus_net(load=buck())
    y_o = net.effective_admittance(2, alpha=1.0, exclude_shunt_at_bus=True)
    for w in (10.0, 1e3, 1e5):
        ys = net.buses[0].device.admittance()(1j * w)
        yl = net.edges[0].line.admittance()(1j * w)
        want = yl * ys / (ys + yl)
        assert y_o(w) == pytest.approx(want, rel=1e-10)


def test_effective_admittance_single_bus_is_diagonal():
    buses = [Bus(1, "source", SourceModel(V_set=30.0, line=LineModel.from_tau(0.5, 0.1)), "src")]
    net = NetworkGraph(buses, [])
    y_o = net.effective_admittance(1, alpha=0.0)
    assert y_o(3.0) == pytest.approx(net.assemble(3j, 0.0)[0, 0])


def test_schur_determinant_consistency():
    buses = [Bus(1, "source", SourceModel(V_set=30.0, line=LineModel.from_tau(0.3, 1e-3)), "src"),
             Bus(2, "load", buck(29.0), "b"),
             Bus(3, "load", buck(28.5), "b")]
    edges = [Edge(1, 2, LineModel.from_tau(0.4, 1e-3)),
             Edge(2, 3, LineModel.from_tau(0.4, 1e-3))]
    net = NetworkGraph(buses, edges)
    rng = np.random.default_rng(8)
    y_o = net.effective_admittance(1, alpha=1.0)
    for _ in range(4):
        w = float(np.exp(rng.uniform(1.0, 11.0)))
        Y = net.assemble(1j * w, 1.0)
        det_full = np.linalg.det(Y)
        det_y4 = np.linalg.det(Y[1:, 1:])
        assert det_full == pytest.approx(y_o(w) * det_y4, rel=1e-8)


def test_validation_errors():
    s = Bus(1, "source", SourceModel(V_set=30.0, line=LineModel.from_tau(0.5, 0.1)), "src")
    with pytest.raises(NetworkError):
        NetworkGraph([s, Bus(2, "load", None, "")],
                     [Edge(2, 2, LineModel.from_tau(0.1, 0.1))])
    with pytest.raises(NetworkError):
        NetworkGraph([s, Bus(2, "load", None, "")], [])  # disconnected
    with pytest.raises(NetworkError):
        NetworkGraph([Bus(1, "load", None, "")], [])  # no source
    with pytest.raises(NetworkError):
        Bus(1, "source", None, "")  # source without model
