"""Decentralized, topology-invariant phase-sector stability certificate.

A set of component admittances Y_k(s, alpha) passes at a grid point (omega,
alpha) when some common rotation e^{j phi} places every component phase
strictly inside (-90, 90) degrees. That holds exactly when the minimal
enclosing circular arc of the phase set is narrower than 180 degrees; the
margin is 180 minus that arc width. A certified set can be interconnected in
any topology and any number without losing small-signal stability, provided
the zero-frequency determinant never crosses zero along the alpha sweep.

Phase moves fastest near lightly damped poles/zeros of the component
admittances, where violations can occupy an omega band far narrower than any
reasonable log grid. The sweep therefore augments the base grid with sample
bundles centered on every low-damping pole/zero of every component at each
alpha.

Two further numerical facts shape the checker:

* With few components the spread can reach 180 degrees only at isolated
  frequencies (two angles are never more than 180 apart), so a fixed margin
  threshold cannot detect the break. Every continuous entry into violation
  passes through an exactly antipodal pair, which shows up as a wrap of the
  pairwise phase difference between adjacent omega samples; the checker
  detects those wraps and refines the crossing frequency by bisection.
* Capacitive loads (+90) and inductive lines (-90) become antipodal in the
  omega -> infinity limit. The margin then decays to zero from above, which
  is benign: the sector condition is an open constraint at each finite
  frequency. Failing any margin below a fixed tolerance would therefore
  reject every such pairing; instead, margins at or below ``margin_tol`` only
  trigger local refinement, and the verdict is strict positivity of the
  refined margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .components import DelayModelError, phase_response, underlying_rational
from .ratfun import PoleHitError, Rational, poly_roots

DEFAULT_OMEGA_MIN = 1e-1
DEFAULT_OMEGA_MAX = 1e7
DEFAULT_OMEGA_POINTS = 2000
DEFAULT_ALPHA_STEP = 0.05
DEFAULT_MARGIN_TOL = 0.5  # degrees

# Poles/zeros with |Re| < RESONANCE_DAMPING * |root| get a sample bundle.
RESONANCE_DAMPING = 0.2

# Margins this deep below zero count as violations; shallower negatives are
# indistinguishable from atan2 round-off on hairline-positive margins.
MARGIN_NOISE_FLOOR = 1e-9  # degrees
_BUNDLE_OFFSETS = np.array([-30.0, -10.0, -5.0, -3.0, -2.0, -1.5, -1.0, -0.7,
                            -0.5, -0.3, -0.15, 0.0, 0.15, 0.3, 0.5, 0.7, 1.0,
                            1.5, 2.0, 3.0, 5.0, 10.0, 30.0])


class PassivityPreconditionError(RuntimeError):
    """The alpha = 0 base case is not a usable 'definitely stable' anchor."""


@dataclass(frozen=True)
class SweepGrid:
    """Log-spaced omega grid and ascending alpha grid of the sweep."""

    omegas: np.ndarray
    alphas: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        a = np.asarray(self.alphas, dtype=float)
        if w.size == 0 or a.size == 0:
            raise ValueError("grids must be nonempty")
        if w[0] <= 0.0:
            raise ValueError("omega grid must be strictly positive")
        if np.any(np.diff(w) <= 0) or np.any(np.diff(a) < 0):
            raise ValueError("grids must be sorted ascending")
        if a[0] < 0.0:
            raise ValueError("alpha grid must be nonnegative")
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "alphas", a)

    @classmethod
    def default(cls, alpha_max: float = 1.0,
                omega_min: float = DEFAULT_OMEGA_MIN,
                omega_max: float = DEFAULT_OMEGA_MAX,
                omega_points: int = DEFAULT_OMEGA_POINTS,
                alpha_step: float = DEFAULT_ALPHA_STEP) -> "SweepGrid":
        n = max(2, int(round(alpha_max / alpha_step)) + 1)
        return cls(np.logspace(np.log10(omega_min), np.log10(omega_max), omega_points),
                   np.linspace(0.0, alpha_max, n))


@dataclass(frozen=True)
class CertComponent:
    """One certificate participant: an id and its admittance generator."""

    id: str
    generator: object  # callable alpha -> evaluable admittance

    def admittance(self, alpha: float):
        return self.generator(alpha)


@dataclass(frozen=True)
class ComponentSet:
    members: tuple

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("component set must be nonempty")

    @classmethod
    def of(cls, *pairs) -> "ComponentSet":
        return cls(tuple(CertComponent(i, g) for i, g in pairs))

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i):
        return self.members[i]


@dataclass
class CertificateReport:
    passed: bool
    margin_deg: float
    violation: tuple | None          # (omega, alpha, (component ids))
    max_feasible_alpha: float
    zero_freq_ok: bool
    zero_freq_checked: bool
    margin_tol: float
    worst_point: tuple | None = None  # (omega, alpha) of the worst margin
    notes: list = field(default_factory=list)


def sector_margin(angles) -> tuple[float, float]:
    """Margin (deg) and feasible-rotation midpoint for a set of phase angles.

    Returns 180 minus the width of the minimal circular arc enclosing the
    angles; positive means a valid rotation phi exists. The midpoint is the
    center of the feasible phi interval (for plotting).
    """
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        raise ValueError("empty angle set")
    srt = np.sort(a)
    gaps = np.diff(srt, append=srt[0] + 360.0)
    k = int(np.argmax(gaps))
    margin = gaps[k] - 180.0
    # Enclosing arc runs from srt[(k+1) % n] forward to srt[k].
    start = srt[(k + 1) % srt.size]
    width = 360.0 - gaps[k]
    mid = start + width / 2.0
    phi = -mid
    phi = (phi + 180.0) % 360.0 - 180.0
    if phi == -180.0:
        phi = 180.0
    return float(margin), float(phi)


def _sector_margins_stacked(theta: np.ndarray) -> np.ndarray:
    """Vectorized margin over axis 0 (components) for each omega column."""
    srt = np.sort(theta, axis=0)
    gaps = np.diff(srt, axis=0, append=(srt[0:1] + 360.0))
    return np.max(gaps, axis=0) - 180.0


def _critical_omegas(rat: Rational, omega_min: float, omega_max: float) -> np.ndarray:
    """Sample bundles around lightly damped poles and zeros."""
    pts = []
    for poly in (rat.den, rat.num):
        if poly.degree < 1:
            continue
        try:
            roots = poly_roots(poly)
        except Exception:
            continue
        for r in roots:
            wr = abs(r.imag)
            if wr <= 0.0 or not (omega_min <= wr <= omega_max * 1.01):
                continue
            sigma = abs(r.real)
            if sigma > RESONANCE_DAMPING * abs(r):
                continue
            spread = max(sigma, 1e-9 * wr)
            w = wr + spread * _BUNDLE_OFFSETS
            pts.append(w[(w > omega_min) & (w <= omega_max)])
    if not pts:
        return np.empty(0)
    return np.concatenate(pts)


def _phase_safe(y, omegas: np.ndarray) -> np.ndarray:
    """Phase sweep with NaN at pole hits / zero-magnitude points."""
    try:
        return np.asarray(phase_response(y, omegas), dtype=float)
    except (PoleHitError, ValueError):
        out = np.empty(omegas.size)
        for k, w in enumerate(omegas):
            try:
                out[k] = phase_response(y, np.array([w]))[0]
            except (PoleHitError, ValueError):
                out[k] = np.nan
        return out


def _phases_at(components, alpha: float, omegas: np.ndarray) -> np.ndarray:
    """Phase of every component at one alpha over the omega vector."""
    theta = np.empty((len(components), omegas.size))
    for i, comp in enumerate(components):
        theta[i] = _phase_safe(comp.admittance(alpha), omegas)
    return theta


def _alpha_omegas(components, alpha: float, grid: SweepGrid) -> np.ndarray:
    extra = []
    for comp in components:
        try:
            rat = underlying_rational(comp.admittance(alpha))
        except DelayModelError:
            continue
        extra.append(_critical_omegas(rat, grid.omegas[0], grid.omegas[-1]))
    if extra:
        allw = np.concatenate([grid.omegas, *extra])
    else:
        allw = grid.omegas
    return np.unique(allw)


def margin_profile(components, alpha: float, grid: SweepGrid):
    """(omegas, margins) for one alpha, including resonance bundles."""
    omegas = _alpha_omegas(components, alpha, grid)
    theta = _phases_at(components, alpha, omegas)
    return omegas, _sector_margins_stacked(theta)


def _wrap180(d):
    out = (np.asarray(d) + 180.0) % 360.0 - 180.0
    return np.where(out == -180.0, 180.0, out)


@dataclass
class AlphaVerdict:
    ok: bool
    margin: float        # most pessimistic refined margin found
    omega: float         # where it occurred
    ids: tuple           # components bounding the enclosing arc there


def _margin_at(components, alpha: float, omega: float) -> float:
    angles = [_phase_safe(c.admittance(alpha), np.array([omega]))[0]
              for c in components]
    angles = [a for a in angles if np.isfinite(a)]
    if len(angles) < 2:
        return 0.0  # a pole pinned exactly on the axis: boundary case
    return sector_margin(angles)[0]


def _refine_minimum(components, alpha, w_lo, w_hi, iters=60):
    """Golden-section minimum of the margin over [w_lo, w_hi] (log scale)."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = np.log(w_lo), np.log(w_hi)
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc = _margin_at(components, alpha, np.exp(c))
    fd = _margin_at(components, alpha, np.exp(d))
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = _margin_at(components, alpha, np.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = _margin_at(components, alpha, np.exp(d))
        if fc <= 0.0 or fd <= 0.0:
            break
    if fc <= fd:
        return float(np.exp(c)), float(fc)
    return float(np.exp(d)), float(fd)


def _refine_crossing(components, i, j, alpha, w_lo, w_hi, iters=80):
    """Bisect the antipodal crossing of pair (i, j) inside (w_lo, w_hi)."""
    def g(w):
        ti = _phase_safe(components[i].admittance(alpha), np.array([w]))[0]
        tj = _phase_safe(components[j].admittance(alpha), np.array([w]))[0]
        if not (np.isfinite(ti) and np.isfinite(tj)):
            return np.nan
        return float(_wrap180(ti - tj - 180.0))

    glo, ghi = g(w_lo), g(w_hi)
    if not (np.isfinite(glo) and np.isfinite(ghi)):
        return 0.5 * (w_lo + w_hi)
    for _ in range(iters):
        mid = np.sqrt(w_lo * w_hi)
        gm = g(mid)
        if not np.isfinite(gm):
            break
        if (gm < 0) == (glo < 0):
            w_lo, glo = mid, gm
        else:
            w_hi, ghi = mid, gm
        if w_hi - w_lo <= 1e-12 * w_hi:
            break
    return float(np.sqrt(w_lo * w_hi))


def _extremal_ids(components, angles: np.ndarray):
    finite = np.isfinite(angles)
    if finite.sum() < 2:
        return tuple(sorted(c.id for c in components))
    idx = np.nonzero(finite)[0]
    vals = angles[finite]
    order = np.argsort(vals)
    srt = vals[order]
    gaps = np.diff(srt, append=srt[0] + 360.0)
    k = int(np.argmax(gaps))
    lo = idx[order[(k + 1) % len(order)]]
    hi = idx[order[k]]
    ids = {components[int(lo)].id, components[int(hi)].id}
    return tuple(sorted(ids))


def check_alpha(components, alpha: float, grid: SweepGrid,
                margin_tol: float = DEFAULT_MARGIN_TOL) -> AlphaVerdict:
    """Strict sector verdict at one alpha.

    Violation means the refined margin reaches zero: either a sampled margin
    is nonpositive, a pairwise phase difference wraps through 180 degrees
    between adjacent samples, or local refinement of a suspicious dip (sampled
    margin <= margin_tol at an interior local minimum) drives it to zero.
    """
    omegas = _alpha_omegas(components, alpha, grid)
    theta = _phases_at(components, alpha, omegas)
    good = np.all(np.isfinite(theta), axis=0)
    omegas_g = omegas[good]
    theta_g = theta[:, good]
    if omegas_g.size == 0:
        return AlphaVerdict(False, 0.0, float(grid.omegas[0]),
                            tuple(c.id for c in components))
    margins = _sector_margins_stacked(theta_g)

    k = int(np.argmin(margins))
    worst = AlphaVerdict(True, float(margins[k]), float(omegas_g[k]),
                         _extremal_ids(components, theta_g[:, k]))
    if margins[k] <= -MARGIN_NOISE_FLOOR:
        worst.ok = False
        return worst

    # Antipodal wrap detection per component pair.
    n = len(components)
    for i in range(n):
        for j in range(i + 1, n):
            d = _wrap180(theta_g[i] - theta_g[j])
            jumps = np.nonzero(np.abs(np.diff(d)) > 180.0)[0]
            if jumps.size:
                kjump = int(jumps[0])
                wstar = _refine_crossing(components, i, j, alpha,
                                         omegas_g[kjump], omegas_g[kjump + 1])
                m = _margin_at(components, alpha, wstar)
                ids = tuple(sorted((components[i].id, components[j].id)))
                return AlphaVerdict(False, min(m, 0.0), wstar, ids)

    # Refine suspicious interior local minima of the sampled margin.
    suspicious = np.nonzero(
        (margins[1:-1] <= margin_tol)
        & (margins[1:-1] <= margins[:-2])
        & (margins[1:-1] <= margins[2:]))[0] + 1
    for k in suspicious:
        wstar, m = _refine_minimum(components, alpha,
                                   omegas_g[k - 1], omegas_g[k + 1])
        if m < worst.margin:
            worst.margin = m
            worst.omega = wstar
            worst.ids = _extremal_ids(
                components,
                np.array([_phase_safe(c.admittance(alpha), np.array([wstar]))[0]
                          for c in components]))
        if m <= -MARGIN_NOISE_FLOOR:
            worst.ok = False
            return worst
    return worst


def check_base_case(components, grid: SweepGrid,
                    margin_tol: float = DEFAULT_MARGIN_TOL) -> None:
    """Verify the alpha = 0 anchor: open-loop poles in the LHP and a valid
    sector at every omega. Raises PassivityPreconditionError otherwise."""
    for comp in components:
        y0 = comp.admittance(0.0)
        try:
            rat = underlying_rational(y0)
        except DelayModelError:
            raise PassivityPreconditionError(
                f"component {comp.id!r} is transcendental at alpha=0")
        if rat.den.degree >= 1:
            poles = poly_roots(rat.den)
            worst = float(np.max(poles.real / np.maximum(np.abs(poles), 1e-300)))
            if worst > 1e-9:
                raise PassivityPreconditionError(
                    f"component {comp.id!r} has an open-loop pole in the RHP")
    v = check_alpha(components, 0.0, grid, margin_tol)
    if not v.ok:
        raise PassivityPreconditionError(
            f"alpha=0 base case already violates the sector condition at "
            f"omega={v.omega:.6g} (components {v.ids})")


def assert_passive_base(components, grid: SweepGrid, tol: float = 1e-9) -> None:
    """Strict nonnegative-real-part check of every component at alpha = 0.

    Converter models built here satisfy this (their alpha = 0 forms are RLC
    networks); generic user loads need not, so certify() does not require it.
    """
    for comp in components:
        y = comp.admittance(0.0)
        v = np.asarray(y(1j * grid.omegas))
        floor = -tol * np.max(np.abs(v))
        if np.any(v.real < floor):
            w = grid.omegas[v.real < floor][0]
            raise PassivityPreconditionError(
                f"component {comp.id!r} has negative real part at alpha=0, "
                f"omega={w:.6g}")


def certify(components, grid: SweepGrid,
            margin_tol: float = DEFAULT_MARGIN_TOL,
            net=None) -> CertificateReport:
    """Run the sector certificate over the full (omega, alpha) grid.

    Records the worst refined margin and the first violation;
    max_feasible_alpha is the largest grid alpha below the first failing one.
    When ``net`` is given the zero-frequency determinant sweep runs as well;
    otherwise the operating point is assumed to sit far from the loadability
    limit and zero-frequency health is taken as an assumption, noted in the
    report.
    """
    if not isinstance(components, ComponentSet):
        components = ComponentSet(tuple(components))
    check_base_case(components, grid, margin_tol)

    worst = (np.inf, None)  # (margin, (omega, alpha))
    violation = None
    max_feasible = grid.alphas[0]
    for alpha in grid.alphas:
        v = check_alpha(components, float(alpha), grid, margin_tol)
        if v.margin < worst[0]:
            worst = (v.margin, (v.omega, float(alpha)))
        if not v.ok:
            violation = (v.omega, float(alpha), v.ids)
            break
        max_feasible = float(alpha)

    notes = []
    if net is not None:
        zero_ok = zero_frequency_check(net, grid.alphas)
        zero_checked = True
    else:
        zero_ok = True
        zero_checked = False
        notes.append("zero-frequency nonsingularity assumed (no network given)")

    passed = violation is None and zero_ok
    return CertificateReport(
        passed=passed,
        margin_deg=worst[0],
        violation=violation,
        max_feasible_alpha=max_feasible,
        zero_freq_ok=zero_ok,
        zero_freq_checked=zero_checked,
        margin_tol=margin_tol,
        worst_point=worst[1],
        notes=notes,
    )


def max_alpha(components, grid: SweepGrid,
              margin_tol: float = DEFAULT_MARGIN_TOL,
              bisection_steps: int = 12) -> tuple[float, float]:
    """Largest alpha passing the sector test, refined by bisection.

    Returns (alpha_star, omega_break): the refined maximum and the frequency
    at which the certificate breaks just above it (nan when the whole grid
    passes, in which case alpha_star is the top grid value).
    """
    if not isinstance(components, ComponentSet):
        components = ComponentSet(tuple(components))
    check_base_case(components, grid, margin_tol)

    lo = None
    hi = None
    omega_break = float("nan")
    for alpha in grid.alphas:
        v = check_alpha(components, float(alpha), grid, margin_tol)
        if v.ok:
            lo = float(alpha)
        else:
            hi = float(alpha)
            omega_break = v.omega
            break
    if lo is None:
        raise PassivityPreconditionError(
            "sector condition fails at the base alpha despite a stable base")
    if hi is None:
        return float(grid.alphas[-1]), omega_break

    for _ in range(max(bisection_steps, 10)):
        mid = 0.5 * (lo + hi)
        v = check_alpha(components, mid, grid, margin_tol)
        if v.ok:
            lo = mid
        else:
            hi = mid
            omega_break = v.omega
    return lo, omega_break


def zero_frequency_check(net, alphas) -> bool:
    """det Y(j0, alpha) keeps one sign and stays away from zero on the sweep."""
    dets = []
    for alpha in np.asarray(alphas, dtype=float):
        Y = net.assemble(0.0, float(alpha))
        dets.append(float(np.linalg.det(Y.real)))
    dets = np.asarray(dets)
    floor = 1e-8 * np.max(np.abs(dets))
    if np.any(np.abs(dets) <= floor):
        return False
    return bool(np.all(dets > 0.0) or np.all(dets < 0.0))


def sector_rows(components, grid: SweepGrid,
                margin_tol: float = DEFAULT_MARGIN_TOL):
    """Yield per-component CSV rows (id, alpha, omega, theta, lo, hi, margin).

    The sector bounds are the phi values admitted by that component alone:
    [-theta - 90, -theta + 90].
    """
    if not isinstance(components, ComponentSet):
        components = ComponentSet(tuple(components))
    for alpha in grid.alphas:
        omegas = _alpha_omegas(components, float(alpha), grid)
        theta = _phases_at(components, float(alpha), omegas)
        margins = _sector_margins_stacked(theta)
        for i, comp in enumerate(components):
            for j, w in enumerate(omegas):
                t = theta[i, j]
                yield (comp.id, float(alpha), float(w), float(t),
                       float(-t - 90.0), float(-t + 90.0), float(margins[j]))
