"""Real-coefficient polynomials and rational functions of the Laplace variable.

Everything downstream (component admittances, network matrices, characteristic
polynomials) is built on the three types here: ``Poly``, ``Rational`` and
``DelayRational``. All objects are immutable after construction and all
operations are pure, so they are safe to share across threads.

Coefficients are stored ascending in degree: ``Poly([2.0, 0.0, 1.0])`` is
``2 + s**2``.
"""

from __future__ import annotations

import numpy as np

# Interpolated determinants overestimate their degree bound and come back
# with near-zero top coefficients; those are trimmed at this fraction of the
# largest coefficient, in the radius-balanced domain where coefficient
# magnitudes are comparable. Plain polynomial arithmetic must NOT strip small
# leading coefficients (SI-unit polynomials legitimately span > 1e12).
TRIM_REL = 1e-12

# Relative backward-error bound a candidate root must satisfy,
# |p(r)| <= ROOT_RESIDUAL_TOL * sum_k |c_k| |r|^k.
ROOT_RESIDUAL_TOL = 1e-8

# Evaluation counts as a pole hit when the denominator value drops below this
# fraction of the sum of its term magnitudes (catastrophic cancellation).
POLE_EPS_REL = 1e-13


class PoleHitError(ArithmeticError):
    """Rational evaluation landed on (numerically at) a pole."""


class RootFindingError(RuntimeError):
    """Polynomial root extraction failed the residual contract."""


class InterpolationError(RuntimeError):
    """Determinant interpolation failed its reconstruction check."""


def _trim(coeffs: np.ndarray) -> np.ndarray:
    """Drop exactly-zero leading coefficients (construction-time only)."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("coefficients must be a nonempty 1-D sequence")
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return np.zeros(1)
    keep = c.size
    while keep > 1 and c[keep - 1] == 0.0:
        keep -= 1
    return c[:keep].copy()


class Poly:
    """Real polynomial with ascending coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = _trim(np.asarray(coeffs, dtype=float))
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):  # immutability guard
        raise AttributeError("Poly is immutable")

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0.0

    def __call__(self, s):
        """Horner evaluation; broadcasts over array-valued ``s``."""
        s = np.asarray(s)
        acc = np.full(s.shape, complex(self.coeffs[-1]))
        for c in self.coeffs[-2::-1]:
            acc = acc * s + c
        return acc if acc.shape else complex(acc)

    def term_scale(self, s):
        """sum_k |c_k| |s|^k, the natural magnitude scale of p(s)."""
        a = np.abs(np.asarray(s))
        acc = np.full(a.shape, abs(float(self.coeffs[-1])))
        for c in self.coeffs[-2::-1]:
            acc = acc * a + abs(c)
        return acc if acc.shape else float(acc)

    def __add__(self, other: "Poly") -> "Poly":
        a, b = self.coeffs, other.coeffs
        n = max(a.size, b.size)
        out = np.zeros(n)
        out[: a.size] += a
        out[: b.size] += b
        return Poly(out)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + other.scale(-1.0)

    def __mul__(self, other: "Poly") -> "Poly":
        if self.is_zero or other.is_zero:
            return Poly([0.0])
        return Poly(np.convolve(self.coeffs, other.coeffs))

    def scale(self, k: float) -> "Poly":
        return Poly(self.coeffs * float(k))

    def monic(self) -> "Poly":
        return Poly(self.coeffs / self.coeffs[-1])

    def derivative(self) -> "Poly":
        if self.degree == 0:
            return Poly([0.0])
        return Poly(self.coeffs[1:] * np.arange(1, self.coeffs.size))

    def divmod_linear(self, root: complex):
        """Deflate by (s - root); returns the quotient, remainder discarded."""
        q = np.zeros(self.coeffs.size - 1, dtype=complex)
        acc = self.coeffs[-1]
        for k in range(self.coeffs.size - 2, -1, -1):
            q[k] = acc
            acc = self.coeffs[k] + acc * root
        return q

    def proportional_to(self, other: "Poly", rel: float = 1e-12) -> bool:
        """True when the two polynomials differ only by a scalar factor."""
        a, b = self.coeffs, other.coeffs
        if a.size != b.size:
            return False
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        ratio = a[-1] / b[-1]
        return bool(np.all(np.abs(a - ratio * b) <= rel * np.max(np.abs(a))))

    def __repr__(self):
        return f"Poly({self.coeffs.tolist()})"


def poly_from_roots(roots, leading: float = 1.0) -> Poly:
    c = np.array([1.0 + 0.0j])
    for r in roots:
        c = np.convolve(c, np.array([-r, 1.0 + 0.0j]))
    return Poly(np.real(c) * leading)


S = Poly([0.0, 1.0])
ONE = Poly([1.0])


class Rational:
    """Ratio of two real polynomials, normalized to a monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly):
        if not isinstance(num, Poly):
            num = Poly(num)
        if not isinstance(den, Poly):
            den = Poly(den)
        if den.is_zero:
            raise ZeroDivisionError("denominator is identically zero")
        lead = den.coeffs[-1]
        object.__setattr__(self, "num", num.scale(1.0 / lead))
        object.__setattr__(self, "den", den.monic())

    def __setattr__(self, name, value):
        raise AttributeError("Rational is immutable")

    @classmethod
    def const(cls, k: float) -> "Rational":
        return cls(Poly([float(k)]), ONE)

    @property
    def poles_degree(self) -> int:
        return self.den.degree

    @property
    def relative_degree(self) -> int:
        return self.den.degree - self.num.degree

    def __call__(self, s):
        d = self.den(s)
        dscale = self.den.term_scale(s)
        bad = np.abs(np.asarray(d)) < POLE_EPS_REL * np.asarray(dscale)
        if np.any(bad):
            where = np.asarray(s)[bad] if np.ndim(s) else s
            raise PoleHitError(f"denominator vanishes at s={where}")
        return self.num(s) / d

    def __add__(self, other: "Rational") -> "Rational":
        # Shared denominators stay shared; this is plain fraction addition,
        # not gcd reduction, and keeps network diagonal entries minimal.
        if self.den.proportional_to(other.den):
            return Rational(self.num + other.num, self.den)
        return Rational(self.num * other.den + other.num * self.den,
                        self.den * other.den)

    def __sub__(self, other: "Rational") -> "Rational":
        return self + other.scale(-1.0)

    def __mul__(self, other: "Rational") -> "Rational":
        return Rational(self.num * other.num, self.den * other.den)

    def __truediv__(self, other: "Rational") -> "Rational":
        if other.num.is_zero:
            raise ZeroDivisionError("division by the zero rational")
        return Rational(self.num * other.den, self.den * other.num)

    def scale(self, k: float) -> "Rational":
        return Rational(self.num.scale(k), self.den)

    def feedback(self, gain: "Rational") -> "Rational":
        """Closed loop self / (1 + gain * self)."""
        den = self.den * gain.den + gain.num * self.num
        if den.is_zero:
            raise ZeroDivisionError("feedback loop denominator is identically zero")
        return Rational(self.num * gain.den, den)

    def poles(self) -> np.ndarray:
        return poly_roots(self.den)

    def zeros(self) -> np.ndarray:
        if self.num.degree < 1:
            return np.empty(0, dtype=complex)
        return poly_roots(self.num)

    def __repr__(self):
        return f"Rational({self.num!r}, {self.den!r})"


class DelayRational:
    """Rational function times a pure transport delay exp(-s*delay).

    Evaluation-only: delayed responses never enter polynomial arithmetic or
    determinants, only pointwise frequency sweeps.
    """

    __slots__ = ("rational", "delay")

    def __init__(self, rational: Rational, delay: float = 0.0):
        if delay < 0.0:
            raise ValueError("delay must be nonnegative")
        object.__setattr__(self, "rational", rational)
        object.__setattr__(self, "delay", float(delay))

    def __setattr__(self, name, value):
        raise AttributeError("DelayRational is immutable")

    def __call__(self, s):
        v = self.rational(s)
        if self.delay == 0.0:
            return v
        return v * np.exp(-np.asarray(s) * self.delay)


def evaluate(f, s):
    """Evaluate a Rational / DelayRational (or any callable response) at s."""
    return f(s)


def combine(a: Rational, b: Rational, kind: str) -> Rational:
    """Exact polynomial arithmetic on two rationals.

    kind: 'add' | 'mul' | 'div' | 'feedback'  (feedback = a / (1 + b*a))
    """
    if kind == "add":
        return a + b
    if kind == "mul":
        return a * b
    if kind == "div":
        return a / b
    if kind == "feedback":
        return a.feedback(b)
    raise ValueError(f"unknown combine kind {kind!r}")


def _root_scale(coeffs: np.ndarray) -> float:
    """Geometric estimate of root magnitude used to balance coefficients."""
    mags = np.abs(coeffs)
    nz = np.nonzero(mags > 0)[0]
    lo, hi = nz[0], nz[-1]
    if hi == lo:
        return 1.0
    sigma = (mags[lo] / mags[hi]) ** (1.0 / (hi - lo))
    if not np.isfinite(sigma) or sigma <= 0.0:
        return 1.0
    return float(sigma)


def poly_roots(p: Poly, residual_tol: float = ROOT_RESIDUAL_TOL) -> np.ndarray:
    """All roots of p, with multiplicity, via a balanced companion matrix.

    The contract is the residual bound: every returned root r satisfies
    |p(r)| <= residual_tol * sum_k |c_k||r|^k. A Newton polish pass runs on
    roots that miss the bound before giving up.
    """
    c = p.coeffs
    if p.degree < 1:
        raise ValueError("degree must be >= 1 after trimming")
    # Strip exact roots at the origin first.
    scale = np.max(np.abs(c))
    n_zero = 0
    while n_zero < c.size - 1 and abs(c[n_zero]) <= 1e-300 * scale:
        n_zero += 1
    c = c[n_zero:]
    roots = [0.0 + 0.0j] * n_zero
    if c.size > 1:
        sigma = _root_scale(c)
        scaled = c * sigma ** np.arange(c.size)
        scaled = scaled / np.max(np.abs(scaled))
        z = np.roots(scaled[::-1])
        roots.extend(sigma * z)
    roots = np.asarray(roots, dtype=complex)

    dp = p.derivative()
    resid = np.abs(p(roots)) / np.maximum(p.term_scale(roots), 1e-300)
    bad = resid > residual_tol
    if np.any(bad):
        r = roots[bad]
        for _ in range(50):
            d = dp(r)
            step = np.where(np.abs(d) > 0, p(r) / np.where(np.abs(d) > 0, d, 1.0), 0.0)
            r = r - step
        roots[bad] = r
        resid = np.abs(p(roots)) / np.maximum(p.term_scale(roots), 1e-300)
        if np.any(resid > residual_tol):
            worst = float(np.max(resid))
            raise RootFindingError(
                f"root residual {worst:.3e} exceeds tolerance {residual_tol:.1e}")
    return roots


def reduce(r: Rational, tol: float = 1e-9) -> Rational:
    """Cancel numerator/denominator root pairs that agree within tol (relative).

    Never applied implicitly: silent cancellation can delete marginal modes.
    """
    if r.num.is_zero or r.num.degree == 0 or r.den.degree == 0:
        return r
    nz = list(poly_roots(r.num))
    dz = list(poly_roots(r.den))
    kept_n = []
    for z in nz:
        hit = None
        for i, q in enumerate(dz):
            if abs(z - q) <= tol * max(1.0, abs(z), abs(q)):
                hit = i
                break
        if hit is None:
            kept_n.append(z)
        else:
            dz.pop(hit)
    ln = r.num.coeffs[-1]
    ld = r.den.coeffs[-1]
    return Rational(poly_from_roots(kept_n, ln), poly_from_roots(dz, ld))


def _row_clear_factors(row):
    """Distinct (up to scalar) denominators of one matrix row."""
    factors = []
    for entry in row:
        if not any(entry.den.proportional_to(f) for f in factors):
            factors.append(entry.den)
    return factors


def _interp_circle(values_fn, degree_bound: int, radius: float):
    """Recover real polynomial coefficients from samples on a circle.

    Samples sit at radius * exp(i(pi/K + 2*pi*k/K)), a conjugate-closed set
    that avoids the real axis (where network poles live). values_fn must
    return log-magnitude and phase separately to dodge overflow. Returns
    (coefficients of the normalized polynomial, log of the normalization).
    """
    K = degree_bound + 1
    theta = np.pi / K + 2.0 * np.pi * np.arange(K) / K
    s = radius * np.exp(1j * theta)
    logmag, phase = values_fn(s)
    logscale = float(np.max(logmag))
    vals = np.exp(logmag - logscale + 1j * phase)
    b = np.fft.fft(vals) / K
    j = np.arange(K)
    coeffs_scaled = b * np.exp(-1j * np.pi * j / K)
    # Imaginary residue measures sampling inconsistency with a real polynomial.
    imag_rel = np.max(np.abs(coeffs_scaled.imag)) / max(np.max(np.abs(coeffs_scaled)), 1e-300)
    if imag_rel > 1e-5:
        raise InterpolationError(f"non-real interpolation residue {imag_rel:.2e}")
    return np.real(coeffs_scaled), logscale


def polymat_det(M, degree_bound: int | None = None, method: str = "interp") -> Rational:
    """Determinant of a square matrix of Rationals, as one Rational.

    Interpolation route: clear each row by the product of its distinct
    denominators, sample the cleared determinant on a circle, and solve for
    the numerator coefficients by FFT. ``degree_bound`` must dominate the true
    numerator degree; the default bound is the per-row sum of cleared-entry
    degrees. Fallback ``method='symbolic'`` does cofactor expansion with exact
    rational arithmetic (n <= 4 only).
    """
    n = len(M)
    if any(len(row) != n for row in M):
        raise ValueError("matrix must be square")
    if n == 1:
        return M[0][0]
    if method == "symbolic":
        if n > 4:
            raise ValueError("symbolic expansion supported for n <= 4 only")
        return _det_symbolic(M)

    row_factors = [_row_clear_factors(row) for row in M]
    den = ONE
    for factors in row_factors:
        for f in factors:
            den = den * f

    if degree_bound is None:
        degree_bound = 0
        for i, row in enumerate(M):
            dens_deg = sum(f.degree for f in row_factors[i])
            num_deg = max(e.num.degree + dens_deg - e.den.degree for e in row)
            degree_bound += max(num_deg, 0)

    pole_mags = np.concatenate([
        np.abs(poly_roots(f)) for factors in row_factors for f in factors
        if f.degree >= 1
    ] or [np.array([1.0])])
    pole_mags = pole_mags[pole_mags > 0]
    radius = float(np.exp(np.mean(np.log(pole_mags)))) if pole_mags.size else 1.0
    radius = max(1.0, radius)

    def values(s):
        logmag = np.zeros(s.shape)
        phase = np.zeros(s.shape)
        for k, sk in enumerate(s):
            A = np.empty((n, n), dtype=complex)
            for i in range(n):
                for j in range(n):
                    A[i, j] = M[i][j](sk)
            sign, logdet = np.linalg.slogdet(A)
            if sign == 0:
                logdet, sign = -745.0, 1.0  # exact zero sample: floor it
            lm = logdet
            ph = np.angle(sign)
            for factors in row_factors:
                for f in factors:
                    v = f(sk)
                    lm += np.log(abs(v))
                    ph += np.angle(v)
            logmag[k] = lm
            phase[k] = ph
        return logmag, phase

    last_err = None
    for attempt_radius in (radius, radius * 10.0):
        try:
            coeffs_scaled, logscale = _interp_circle(values, degree_bound,
                                                     attempt_radius)
        except (InterpolationError, PoleHitError) as err:
            last_err = err
            continue
        # Trim in the scaled domain where coefficients are balanced.
        scale = np.max(np.abs(coeffs_scaled))
        keep = coeffs_scaled.size
        while keep > 1 and abs(coeffs_scaled[keep - 1]) <= TRIM_REL * scale:
            keep -= 1
        c = coeffs_scaled[:keep] * np.exp(logscale) \
            / attempt_radius ** np.arange(keep)
        return Rational(Poly(c), den)
    raise InterpolationError(f"determinant interpolation failed: {last_err}")


def _det_symbolic(M) -> Rational:
    n = len(M)
    if n == 1:
        return M[0][0]
    acc = None
    for j in range(n):
        minor = [[M[i][k] for k in range(n) if k != j] for i in range(1, n)]
        term = M[0][j] * _det_symbolic(minor)
        if j % 2 == 1:
            term = term.scale(-1.0)
        acc = term if acc is None else acc + term
    return acc
