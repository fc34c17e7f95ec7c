import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcstab.ratfun import (ONE, InterpolationError, Poly, PoleHitError,
                           Rational, RootFindingError, combine, evaluate,
                           poly_from_roots, poly_roots, polymat_det, reduce)

TWO_PI = 2.0 * np.pi


def simple_lag():
    return Rational(ONE, Poly([1.0, 1.0]))  # 1 / (s + 1)


def test_eval_identity_cases():
    f = simple_lag()
    assert evaluate(f, 0.0) == pytest.approx(1.0)
    assert evaluate(f, 1j) == pytest.approx((1 - 1j) / 2)


def test_eval_line_dc_conductance():
    # 0.1 ohm/km at 1 km with a 1 ms time constant: 10 S at DC.
    R, tau = 0.1, 1e-3
    line = Rational(ONE, Poly([R, tau * R]))
    assert evaluate(line, 0.0) == pytest.approx(10.0)


def test_eval_pole_hit():
    f = simple_lag()
    with pytest.raises(PoleHitError):
        f(-1.0)


def test_combine_add_shared_denominator():
    f = simple_lag()
    g = combine(f, f, "add")
    assert g.den.degree == 1
    assert g(0.37j) == pytest.approx(2.0 * f(0.37j))


def test_feedback_zero_gain_is_identity():
    h0 = Rational(ONE, Poly([39.0, 1.2, 1.0]))
    fb = combine(h0, Rational.const(0.0), "feedback")
    for s in (0.0, 1j, 2.0 + 3.0j):
        assert fb(s) == pytest.approx(h0(s))


def test_feedback_pi_clears_to_cubic():
    # h0 = 1/(s^2 + 2 zeta wn s + wn^2) under PI-gain feedback K(1 + 1/(s tau_i))
    # clears to tau_i s^3 + 2 zeta wn tau_i s^2 + tau_i (wn^2 + K) s + K.
    wn, zeta, K, tau_i = TWO_PI, 0.1, 18.0, 0.25
    h0 = Rational(ONE, Poly([wn * wn, 2 * zeta * wn, 1.0]))
    gain = Rational(Poly([1.0, tau_i]).scale(K), Poly([0.0, tau_i]))
    closed = combine(h0, gain, "feedback")
    expected = Poly([K, tau_i * (wn * wn + K), 2 * zeta * wn * tau_i, tau_i])
    got = closed.den.monic().coeffs
    want = expected.monic().coeffs
    assert got == pytest.approx(want, rel=1e-12)


def test_poly_roots_examples():
    r = np.sort_complex(poly_roots(Poly([1.0, 0.0, 1.0])))
    assert r == pytest.approx(np.array([-1j, 1j]))
    r = poly_roots(Poly([1.0, 2.0, 1.0]))
    assert r == pytest.approx(np.array([-1.0, -1.0]), abs=1e-6)


def test_poly_roots_marginal_cubic():
    # Cubic s^3 + (tau R + 2 zeta wn)s^2 + (wn^2 + K + R)s + K/tau_i with the
    # gain at the Routh-Hurwitz boundary: imaginary pair at sqrt(a1).
    wn, zeta, tau, tau_i, R = TWO_PI, 0.1, 0.1, 0.25, 1.0
    a2 = tau * R + 2 * zeta * wn
    K = tau_i * a2 * (wn * wn + R) / (1 - tau_i * a2)
    a1 = wn * wn + K + R
    roots = poly_roots(Poly([K / tau_i, a1, a2, 1.0]))
    pair = np.sort_complex(roots[np.abs(roots.imag) > 1.0])
    w_hat = np.sqrt(a1)
    assert w_hat == pytest.approx(7.826, abs=5e-3)
    assert pair == pytest.approx(np.array([-1j * w_hat, 1j * w_hat]), abs=1e-9)


def test_poly_roots_residual_contract_failure():
    with pytest.raises(ValueError):
        poly_roots(Poly([1.0]))


@given(st.lists(st.floats(-50.0, 50.0), min_size=1, max_size=4),
       st.lists(st.floats(-50.0, 50.0), min_size=1, max_size=4),
       st.sampled_from(["add", "mul", "div", "feedback"]),
       st.floats(-10.0, 10.0), st.floats(0.1, 10.0))
@settings(max_examples=150, deadline=None)
def test_eval_combine_consistency(na, nb, kind, sre, sim):
    a = Rational(Poly(na + [1.0]), Poly([2.0, 0.5, 1.0]))
    b = Rational(Poly(nb + [1.0]), Poly([3.0, 1.5, 1.0]))
    s = complex(sre, sim)
    try:
        c = combine(a, b, kind)
        got = c(s)
    except (ZeroDivisionError, PoleHitError):
        return
    va, vb = a(s), b(s)
    want = {"add": va + vb, "mul": va * vb, "div": va / vb,
            "feedback": va / (1 + vb * va)}[kind]
    if abs(want) < 1e-12:
        return
    assert got == pytest.approx(want, rel=1e-10)


@given(st.integers(2, 12), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=60, deadline=None)
def test_poly_roots_round_trip(degree, seed):
    rng = np.random.default_rng(seed)
    # well-separated roots: real parts on a jittered grid, conjugate-closed
    roots = []
    k = 0
    while len(roots) < degree:
        base = -1.0 - 1.5 * k + rng.uniform(-0.2, 0.2)
        if degree - len(roots) >= 2 and rng.random() < 0.5:
            im = rng.uniform(1.0, 3.0)
            roots += [complex(base, im), complex(base, -im)]
        else:
            roots.append(complex(base, 0.0))
        k += 1
    lead = rng.uniform(0.5, 2.0)
    p = poly_from_roots(roots, lead)
    rec = poly_from_roots(poly_roots(p), lead)
    assert rec.coeffs == pytest.approx(p.coeffs, rel=1e-8, abs=1e-8)


def test_reduce_cancels_matching_pairs():
    common = Poly([3.0, 1.0])
    f = Rational(Poly([1.0, 1.0]) * common, Poly([2.0, 1.0]) * common)
    g = reduce(f)
    assert g.den.degree == 1
    for s in (0.0, 1j, 0.5 + 2j):
        assert g(s) == pytest.approx(f(s))


def _rat(num, den):
    return Rational(Poly(num), Poly(den))


def test_polymat_det_1x1():
    y = simple_lag()
    det = polymat_det([[y]])
    assert det(2j) == pytest.approx(y(2j))


def test_polymat_det_two_bus_block():
    # [[Ys+Yl, -Yl], [-Yl, YL+Yl]] must equal (Ys+Yl)(YL+Yl) - Yl^2.
    tau = 0.1
    Ys = _rat([2.0], [1.0, tau])
    Yl = _rat([2.0], [1.0, tau])
    YL = _rat([0.0, 0.25], [20.77, 10.0, 0.3, 0.25])
    M = [[Ys + Yl, Yl.scale(-1.0)], [Yl.scale(-1.0), YL + Yl]]
    det = polymat_det(M)
    for s in (0.5j, 3j, 1.0 + 2j):
        want = (Ys(s) + Yl(s)) * (YL(s) + Yl(s)) - Yl(s) ** 2
        assert det(s) == pytest.approx(want, rel=1e-9)


def test_polymat_det_matches_symbolic_cofactor():
    rng = np.random.default_rng(11)
    for trial in range(6):
        M = [[_rat(rng.normal(size=rng.integers(1, 4)),
                   np.r_[rng.normal(size=rng.integers(1, 3)), [1.0]])
              for _ in range(3)] for _ in range(3)]
        try:
            det_i = polymat_det(M)
            det_s = polymat_det(M, method="symbolic")
        except (InterpolationError, ZeroDivisionError):
            continue
        pts = rng.normal(size=20) + 1j * rng.normal(size=20)
        for s in pts:
            try:
                want = det_s(s)
                got = det_i(s)
            except PoleHitError:
                continue
            if abs(want) < 1e-9:
                continue
            assert got == pytest.approx(want, rel=1e-8)


def test_polymat_det_radial_degree_54(radial10):
    from dcstab.eigenmodes import char_poly
    assert char_poly(radial10, 1.0).degree == 54
