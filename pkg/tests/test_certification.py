import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcstab.certification import (CertComponent, ComponentSet,
                                  PassivityPreconditionError, SweepGrid,
                                  assert_passive_base, certify, check_alpha,
                                  margin_profile, max_alpha, sector_margin,
                                  zero_frequency_check)
from dcstab.components import (BuckConverterModel, Compensator, LeadLag,
                               LineModel, PI, PlantPILoad, SourceModel)
from dcstab.network import Bus, Edge, NetworkGraph
from dcstab.ratfun import ONE, Poly, Rational

TWO_PI = 2.0 * np.pi


def leadlag_buck(V=28.0, tau_d=0.0):
    comp = Compensator(LeadLag(Gc_inf=3.7, wL=TWO_PI * 500, wz=TWO_PI * 1700,
                               wp=TWO_PI * 14.5e3), delay=tau_d)
    return BuckConverterModel(V=V, R=3.0, L=50e-6, C=500e-6, D=0.536,
                              H=1 / 3, Vm=4.0, compensator=comp, Cf=500e-6)


def pi_buck(V=28.0):
    comp = Compensator(PI(Gi=0.015, wi=TWO_PI * 500))
    return BuckConverterModel(V=V, R=3.0, L=50e-6, C=500e-6, D=0.536,
                              H=1 / 3, Vm=4.0, compensator=comp, Cf=500e-6)


def line_member(tau=1e-3, R=0.1):
    line = LineModel.from_tau(R, tau)
    return CertComponent("line", lambda a: line.admittance(a))


def buck_members(builder, volts=(28.0, 30.0)):
    out = []
    for V in volts:
        m = builder(V)
        out.append(CertComponent(f"buck@{V:g}", lambda a, m=m: m.admittance(a)))
    return out


# ------------------------------------------------------------- sector_margin

def test_sector_margin_examples():
    assert sector_margin([0.0, 90.0])[0] == pytest.approx(90.0)
    assert sector_margin([0.0, 180.0])[0] == pytest.approx(0.0)
    assert sector_margin([-170.0, 170.0])[0] == pytest.approx(160.0)


def test_sector_margin_empty():
    with pytest.raises(ValueError):
        sector_margin([])


@given(st.lists(st.floats(-179.999, 180.0), min_size=1, max_size=6))
@settings(max_examples=200, deadline=None)
def test_sector_margin_midpoint_rotates_into_open_halfplane(angles):
    margin, phi = sector_margin(angles)
    if margin <= 1e-9:
        return
    rotated = (np.asarray(angles) + phi + 180.0) % 360.0 - 180.0
    assert np.all(np.abs(rotated) < 90.0 + 1e-6)


def test_scaling_leaves_margins_unchanged():
    line = LineModel.from_tau(0.1, 1e-3)
    m = leadlag_buck()
    base = ComponentSet.of(("line", lambda a: line.admittance(a)),
                           ("buck", lambda a: m.admittance(a)))
    scaled = ComponentSet.of(
        ("line", lambda a: _scaled(line.admittance(a), 7.3)),
        ("buck", lambda a: _scaled(m.admittance(a), 0.002)))
    grid = SweepGrid(np.logspace(0, 6, 400), np.array([0.0, 0.5, 1.0]))
    for alpha in grid.alphas:
        _, m1 = margin_profile(base, float(alpha), grid)
        _, m2 = margin_profile(scaled, float(alpha), grid)
        assert m1 == pytest.approx(m2, abs=1e-9)


def _scaled(y, k):
    if isinstance(y, Rational):
        return y.scale(k)
    return lambda s: k * y(s)


# ---------------------------------------------------------------- certify

def small_grid(alpha_max=1.0, points=800):
    return SweepGrid.default(alpha_max=alpha_max, omega_points=points)


def test_two_bus_certificate_break():
    wn, zeta, tau, tau_i, R = TWO_PI, 0.1, 0.1, 0.25, 1.0
    a2 = tau * R + 2 * zeta * wn
    K_hat = tau_i * a2 * (wn * wn + R) / (1 - tau_i * a2)
    load = PlantPILoad(wn=wn, zeta=zeta, K=K_hat, tau_i=tau_i)
    cs = ComponentSet.of(("line", lambda a: LineModel.from_tau(0.5, tau).admittance(a)),
                         ("load", lambda a: load.admittance(a)))
    astar, wbreak = max_alpha(cs, SweepGrid.default(alpha_max=1.0))
    assert astar == pytest.approx(0.871, rel=0.02)
    assert wbreak == pytest.approx(7.59, rel=0.02)


def test_certify_report_fields():
    cs = ComponentSet.of(*[("line", lambda a: LineModel.from_tau(0.1, 1e-3).admittance(a))],
                         *[(c.id, c.generator) for c in buck_members(leadlag_buck)])
    rep = certify(cs, small_grid(alpha_max=1.0))
    assert rep.passed
    assert rep.max_feasible_alpha == pytest.approx(1.0)
    assert rep.margin_deg > 0.0
    assert rep.violation is None
    assert not rep.zero_freq_checked


def test_certify_detects_pi_break():
    cs = ComponentSet(tuple([line_member()] + buck_members(pi_buck)))
    rep = certify(cs, SweepGrid.default(alpha_max=5.0))
    assert not rep.passed
    assert rep.violation is not None
    _, alpha_v, _ = rep.violation
    assert 3.8 < alpha_v < 4.1
    assert rep.max_feasible_alpha < alpha_v


def test_max_alpha_pi():
    cs = ComponentSet(tuple([line_member()] + buck_members(pi_buck)))
    astar, wbreak = max_alpha(cs, SweepGrid.default(alpha_max=5.0))
    assert astar == pytest.approx(3.8, rel=0.03)
    assert wbreak > 1e3


def test_unstable_base_rejected():
    bad = Rational(ONE, Poly([-1.0, 1.0]))  # pole at +1
    cs = ComponentSet.of(("bad", lambda a: bad),
                         ("line", lambda a: LineModel.from_tau(0.1, 1e-3).admittance(a)))
    with pytest.raises(PassivityPreconditionError):
        certify(cs, small_grid())


def test_assert_passive_base():
    cs = ComponentSet(tuple([line_member()] + buck_members(leadlag_buck)))
    assert_passive_base(cs, small_grid())
    load = PlantPILoad(wn=TWO_PI, zeta=0.1, K=20.77, tau_i=0.25)
    cs2 = ComponentSet.of(("load", lambda a: load.admittance(a)))
    with pytest.raises(PassivityPreconditionError):
        assert_passive_base(cs2, small_grid())


def test_grid_refinement_keeps_passing_points():
    cs = ComponentSet(tuple([line_member()] + buck_members(leadlag_buck)))
    coarse = SweepGrid.default(alpha_max=1.0, omega_points=500)
    fine = SweepGrid.default(alpha_max=1.0, omega_points=1000)
    for alpha in coarse.alphas[:: 5]:
        wc, mc = margin_profile(cs, float(alpha), coarse)
        wf, mf = margin_profile(cs, float(alpha), fine)
        lookup = dict(zip(wf, mf))
        reused = [w for w in wc if w in lookup]
        for w in reused:
            assert lookup[w] == pytest.approx(mc[list(wc).index(w)], abs=1e-9)


# ------------------------------------------------- zero-frequency check

def test_zero_frequency_check_passive_and_fixture(radial10):
    assert zero_frequency_check(radial10, np.arange(0.0, 10.01, 0.5))


def test_zero_frequency_check_beyond_nose():
    # a CPL whose magnitude exceeds the path conductance flips the DC det
    heavy = BuckConverterModel(V=29.0, R=0.45, L=50e-6, C=500e-6, D=0.9,
                               H=1 / 3, Vm=4.0,
                               compensator=Compensator(LeadLag(3.7, TWO_PI * 500, TWO_PI * 1700, TWO_PI * 14.5e3)),
                               Cf=500e-6)
    assert heavy.D ** 2 / heavy.R > 1.0  # beyond 1/(Rs+Rl) = 1 S
    buses = [Bus(1, "source", SourceModel(V_set=30.0, line=LineModel.from_tau(0.5, 1e-3)), "s"),
             Bus(2, "load", heavy, "l")]
    net = NetworkGraph(buses, [Edge(1, 2, LineModel.from_tau(0.5, 1e-3))])
    assert not zero_frequency_check(net, np.array([0.0, 0.5, 1.0]))


# ------------------------------------- equivalence with the matrix PD test

def test_sector_margin_implies_rotated_positive_definiteness():
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 100:
        n = int(rng.integers(2, 4))
        models = []
        for k in range(n):
            V = rng.uniform(28.0, 30.0)
            if rng.random() < 0.5:
                models.append(leadlag_buck(V))
            else:
                models.append(pi_buck(V))
        lines = [LineModel.from_tau(rng.uniform(0.05, 0.3), 1e-3)
                 for _ in range(n - 1)]
        alpha = float(rng.uniform(0.0, 2.0))
        w = float(np.exp(rng.uniform(0.0, 12.0)))
        angles = [float(np.degrees(np.angle(m.rational_admittance(alpha)(1j * w))))
                  for m in models]
        angles += [float(np.degrees(np.angle(l.admittance()(1j * w))))
                   for l in lines]
        margin, phi = sector_margin(angles)
        if margin <= 0.5:
            continue
        # assemble a chain network of these components and rotate
        buses = [Bus(k + 1, "load", models[k], "m") for k in range(n)]
        buses[0] = Bus(1, "source",
                       SourceModel(V_set=30.0, line=LineModel.from_tau(0.1, 1e-3)), "s")
        edges = [Edge(k + 1, k + 2, lines[k]) for k in range(n - 1)]
        net = NetworkGraph(buses, edges)
        Y = net.assemble(1j * w, alpha)
        D = np.exp(1j * np.radians(phi))
        H = D * Y + (D * Y).conj().T
        eig = np.linalg.eigvalsh(H)
        assert eig.min() > 0.0
        checked += 1


def test_certificate_sound_vs_oracle(radial10_pi):
    # wherever the decentralized test passes, the centralized oracle agrees
    from dcstab.timesim import network_modes
    cs = ComponentSet(tuple([line_member()] + buck_members(pi_buck)))
    astar, _ = max_alpha(cs, SweepGrid.default(alpha_max=5.0))
    for alpha in np.linspace(0.25, astar, 6):
        assert np.max(network_modes(radial10_pi, float(alpha)).real) < 0.0
