import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import hausdorff
from dcstab.components import (BuckConverterModel, Compensator, DelayModelError,
                               LeadLag, LineModel, SourceModel)
from dcstab.eigenmodes import (char_poly, eigenmodes, locus, marginal_alpha,
                               max_real_part, spectrum_modes)
from dcstab.network import Bus, Edge, NetworkGraph
from dcstab.ratfun import Poly, poly_roots

TWO_PI = 2.0 * np.pi
WN, ZETA, TAU, TAU_I, RTOT = TWO_PI, 0.1, 0.1, 0.25, 1.0
A2 = TAU * RTOT + 2 * ZETA * WN
K_HAT = TAU_I * A2 * (WN * WN + RTOT) / (1 - TAU_I * A2)


def reference_cubic(K):
    return Poly([K / TAU_I, WN * WN + K + RTOT, A2, 1.0])


def test_two_bus_char_poly_is_the_cubic(two_bus):
    for alpha in (0.4, 1.0):
        p = char_poly(two_bus, alpha)
        assert p.degree == 3
        got = p.monic().coeffs
        want = reference_cubic(alpha * K_HAT).monic().coeffs
        assert got == pytest.approx(want, rel=1e-8)


def test_two_bus_eigenmodes_match_cubic_roots(two_bus):
    for alpha in (0.3, 0.8, 1.0):
        got = np.sort_complex(eigenmodes(two_bus, alpha))
        want = np.sort_complex(poly_roots(reference_cubic(alpha * K_HAT)))
        assert hausdorff(got, want) <= 1e-8 * np.max(np.abs(want))


def test_two_bus_marginal_alpha_is_unity(two_bus):
    am = marginal_alpha(two_bus, 0.9, 1.1, tol=1e-4, spectrum="det")
    assert am == pytest.approx(1.0, abs=1e-3)
    modes = eigenmodes(two_bus, 1.0)
    pair = modes[np.abs(modes.imag) > 1.0]
    w_hat = np.sqrt(WN * WN + K_HAT + RTOT)
    assert np.max(np.abs(pair.real)) <= 1e-3 * w_hat
    assert np.sort(np.abs(pair.imag)) == pytest.approx([w_hat, w_hat], rel=1e-6)


def test_char_poly_degrees(radial10, mesh8, radial10_pi):
    assert char_poly(radial10, 1.0).degree == 54
    assert char_poly(mesh8, 1.0).degree == 40
    assert char_poly(radial10_pi, 1.0).degree == 45


def test_alpha_zero_modes_in_lhp(radial10):
    assert np.max(eigenmodes(radial10, 0.0).real) < 0.0
    assert np.max(spectrum_modes(radial10, 0.0, "state").real) < 0.0


def test_radial_leadlag_stable_at_alpha_10(radial10):
    assert max_real_part(radial10, 10.0) < 0.0


def test_conjugate_pairing(radial10):
    modes = eigenmodes(radial10, 1.0)
    scale = np.max(np.abs(modes))
    for r in modes:
        if abs(r.imag) > 1e-8 * scale:
            assert np.min(np.abs(modes - np.conj(r))) <= 1e-8 * scale


def test_locus_radial_pi_crossing(radial10_pi):
    trace = locus(radial10_pi, np.arange(3.5, 4.6, 0.1))
    assert trace.marginal_alpha == pytest.approx(4.07, rel=0.02)
    rows = list(trace.rows())
    assert len(rows) > 100 and len(rows[0]) == 3


def test_mesh_leadlag_locus_stays_left(mesh8):
    trace = locus(mesh8, np.arange(0.0, 10.01, 1.0))
    assert np.all(trace.max_real_part < 0.0)
    assert trace.marginal_alpha is None


def test_marginal_alpha_requires_bracket(two_bus):
    with pytest.raises(ValueError):
        marginal_alpha(two_bus, 0.1, 0.5, spectrum="det")


def test_delay_model_rejected():
    comp = Compensator(LeadLag(Gc_inf=3.7, wL=TWO_PI * 500, wz=TWO_PI * 1700,
                               wp=TWO_PI * 14.5e3), delay=1e-5)
    buck = BuckConverterModel(V=29.0, R=3.0, L=50e-6, C=500e-6, D=0.536,
                              H=1 / 3, Vm=4.0, compensator=comp, Cf=500e-6)
    buses = [Bus(1, "source", SourceModel(V_set=30.0, line=LineModel.from_tau(0.1, 1e-3)), "s"),
             Bus(2, "load", buck, "b")]
    net = NetworkGraph(buses, [Edge(1, 2, LineModel.from_tau(0.1, 1e-3))])
    with pytest.raises(DelayModelError):
        char_poly(net, 1.0)


def test_det_vs_state_spectrum_small_fixtures():
    comp = Compensator(LeadLag(Gc_inf=3.7, wL=TWO_PI * 500, wz=TWO_PI * 1700,
                               wp=TWO_PI * 14.5e3))
    def buck(V):
        return BuckConverterModel(V=V, R=3.0, L=50e-6, C=500e-6, D=0.536,
                                  H=1 / 3, Vm=4.0, compensator=comp, Cf=500e-6)
    src = Bus(1, "source", SourceModel(V_set=30.0, line=LineModel.from_tau(0.1, 1e-3)), "s")
    two = NetworkGraph([src, Bus(2, "load", buck(29.0), "b")],
                       [Edge(1, 2, LineModel.from_tau(0.12, 1e-3))])
    three = NetworkGraph([src, Bus(2, "load", buck(29.0), "b"),
                          Bus(3, "load", buck(28.6), "b")],
                         [Edge(1, 2, LineModel.from_tau(0.12, 1e-3)),
                          Edge(2, 3, LineModel.from_tau(0.09, 1e-3))])
    for net in (two, three):
        for alpha in (0.0, 1.0, 3.0):
            det_modes = eigenmodes(net, alpha)
            state_modes = spectrum_modes(net, alpha, "state")
            assert det_modes.size == state_modes.size
            rel = hausdorff(det_modes, state_modes) / np.max(np.abs(state_modes))
            assert rel < 1e-6


def test_root_continuity_along_alpha(two_bus):
    alphas = np.linspace(0.2, 0.9, 15)
    prev = None
    for a in alphas:
        modes = np.sort_complex(eigenmodes(two_bus, float(a)))
        if prev is not None:
            # nearest-neighbour step stays bounded by a sensitivity estimate
            for r in modes:
                assert np.min(np.abs(prev - r)) < 10.0 * (alphas[1] - alphas[0]) * 50.0
        prev = modes


@given(st.floats(1.0, 20.0), st.floats(0.02, 0.5), st.floats(0.01, 0.5),
       st.floats(0.05, 1.0), st.floats(0.2, 3.0), st.floats(0.1, 60.0))
@settings(max_examples=100, deadline=None)
def test_routh_hurwitz_agreement(wn, zeta, tau, tau_i, R, K):
    # cubic s^3 + a2 s^2 + a1 s + a0 stable iff a2 a1 > a0 (all positive)
    a2 = tau * R + 2 * zeta * wn
    a1 = wn * wn + K + R
    a0 = K / tau_i
    roots = poly_roots(Poly([a0, a1, a2, 1.0]))
    stable = bool(np.max(roots.real) < 0.0)
    want = a2 * a1 > a0
    if abs(a2 * a1 - a0) < 1e-9 * max(a2 * a1, a0):
        return  # on the knife edge, both verdicts are acceptable
    assert stable == want
