"""Parameterized small-signal admittance models for DC microgrid devices.

Every device produces an input admittance Y(s, alpha) where the homotopy
parameter alpha scales the closed-loop controller gain: alpha = 0 is the
open-loop (passive) configuration, alpha = 1 the nominal tuning. Admittances
come back as ``Rational`` objects when they are delay-free, or as
evaluation-only callables when a loop delay is present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ratfun import ONE, Poly, Rational


class DelayModelError(ValueError):
    """A transcendental (delayed) model reached a polynomial-only code path."""


# --------------------------------------------------------------------------
# lines and sources
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LineModel:
    """Series RL line: Y(s) = 1 / (R + s L)."""

    resistance: float
    inductance: float
    length_km: float | None = None

    def __post_init__(self):
        if self.resistance <= 0.0:
            raise ValueError("line resistance must be positive")
        if self.inductance < 0.0:
            raise ValueError("line inductance must be nonnegative")

    @classmethod
    def from_length(cls, length_km: float, r_per_km: float, tau: float) -> "LineModel":
        R = r_per_km * length_km
        return cls(resistance=R, inductance=tau * R, length_km=length_km)

    @classmethod
    def from_tau(cls, resistance: float, tau: float) -> "LineModel":
        return cls(resistance=resistance, inductance=tau * resistance)

    @property
    def tau(self) -> float:
        return self.inductance / self.resistance

    def admittance(self, alpha: float = 0.0) -> Rational:
        return Rational(ONE, Poly([self.resistance, self.inductance]))

    rational_admittance = admittance


@dataclass(frozen=True)
class SourceModel:
    """Ideal voltage source behind a series line.

    In the small-signal admittance picture the ideal source is a direct path
    to ground, so the device contributes its series-line admittance as a shunt
    at its bus.
    """

    V_set: float
    line: LineModel

    def admittance(self, alpha: float = 0.0) -> Rational:
        return self.line.admittance()

    rational_admittance = admittance


def line_admittance(line: LineModel) -> Rational:
    return line.admittance()


# --------------------------------------------------------------------------
# compensators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LeadLag:
    """Gc(s) = Gc_inf * (1 + wL/s)(1 + s/wz) / (1 + s/wp)."""

    Gc_inf: float
    wL: float
    wz: float
    wp: float

    def __post_init__(self):
        if min(self.wL, self.wz, self.wp) <= 0.0 or self.Gc_inf < 0.0:
            raise ValueError("lead-lag corner frequencies must be positive, gain >= 0")

    def rational(self) -> Rational:
        num = Poly([self.wL, 1.0]) * Poly([1.0, 1.0 / self.wz])
        return Rational(num.scale(self.Gc_inf), Poly([0.0, 1.0, 1.0 / self.wp]))


@dataclass(frozen=True)
class PI:
    """Gc(s) = Gi * (1 + wi/s)."""

    Gi: float
    wi: float

    def __post_init__(self):
        if self.wi <= 0.0 or self.Gi < 0.0:
            raise ValueError("PI corner frequency must be positive, gain >= 0")

    def rational(self) -> Rational:
        return Rational(Poly([self.wi, 1.0]).scale(self.Gi), Poly([0.0, 1.0]))


@dataclass(frozen=True)
class PIGain:
    """Gc(s) = K * (1 + 1/(s tau_i))."""

    K: float
    tau_i: float

    def __post_init__(self):
        if self.tau_i <= 0.0 or self.K < 0.0:
            raise ValueError("integrator time constant must be positive, gain >= 0")

    def rational(self) -> Rational:
        return Rational(Poly([1.0, self.tau_i]).scale(self.K), Poly([0.0, self.tau_i]))


@dataclass(frozen=True)
class Compensator:
    variant: LeadLag | PI | PIGain
    delay: float = 0.0

    def __post_init__(self):
        if self.delay < 0.0:
            raise ValueError("compensator delay must be nonnegative")

    def rational(self) -> Rational:
        return self.variant.rational()


# --------------------------------------------------------------------------
# buck converter
# --------------------------------------------------------------------------

class LoopDelayedAdmittance:
    """Admittance whose loop gain carries exp(-s*tau_d).

    The delay multiplies the loop-gain term only, so the result is not a plain
    rational times a delay factor; it supports pointwise evaluation and keeps
    the delay-free rational around for structural queries (pole bundles).
    """

    __slots__ = ("zd_inv", "zn_inv", "loop", "delay", "cf", "undelayed")

    def __init__(self, zd_inv: Rational, zn_inv: float, loop: Rational,
                 delay: float, cf: float, undelayed: Rational):
        self.zd_inv = zd_inv
        self.zn_inv = zn_inv
        self.loop = loop
        self.delay = delay
        self.cf = cf
        self.undelayed = undelayed

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        T = self.loop(s) * np.exp(-s * self.delay)
        y = self.zd_inv(s) / (1.0 + T) + self.zn_inv * T / (1.0 + T) + self.cf * s
        return y if y.shape else complex(y)


@dataclass(frozen=True)
class BuckConverterModel:
    """Averaged buck converter feeding a constant-resistance load.

    V is the converter input voltage (the bus it hangs on); the duty-to-output
    transfer function uses the DC gain Gd0 = V / D.
    """

    V: float
    R: float
    L: float
    C: float
    D: float
    H: float
    Vm: float
    compensator: Compensator
    Cf: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.D < 1.0:
            raise ValueError("duty cycle must lie in (0, 1)")
        if min(self.R, self.L, self.C, self.Vm) <= 0.0:
            raise ValueError("R, L, C, Vm must be positive")
        if self.Cf < 0.0:
            raise ValueError("filter capacitance must be nonnegative")

    @property
    def w0(self) -> float:
        return 1.0 / math.sqrt(self.L * self.C)

    @property
    def zeta(self) -> float:
        return math.sqrt(self.L / self.C) / (2.0 * self.R)

    @property
    def Gd0(self) -> float:
        return self.V / self.D

    def with_voltage(self, V: float) -> "BuckConverterModel":
        return BuckConverterModel(V, self.R, self.L, self.C, self.D, self.H,
                                  self.Vm, self.compensator, self.Cf)

    def control_to_output(self) -> Rational:
        """Duty-to-output transfer Gvd(s) = Gd0 w0^2 / (s^2 + 2 zeta w0 s + w0^2)."""
        w0 = self.w0
        return Rational(Poly([self.Gd0 * w0 * w0]),
                        Poly([w0 * w0, 2.0 * self.zeta * w0, 1.0]))

    def loop_gain(self, alpha: float = 1.0) -> Rational:
        """T(s) = alpha * Gc Gvd H / Vm, without the delay factor."""
        gc = self.compensator.rational()
        return (gc * self.control_to_output()).scale(alpha * self.H / self.Vm)

    def constant_impedance_admittance(self) -> Rational:
        """1/Z_D: the admittance with the control input frozen."""
        num = Poly([1.0, self.R * self.C]).scale(self.D * self.D)
        den = Poly([self.R, self.L, self.R * self.L * self.C])
        return Rational(num, den)

    @property
    def cpl_conductance(self) -> float:
        """1/Z_N: negative incremental conductance of the ideal regulated load."""
        return -self.D * self.D / self.R

    def rational_admittance(self, alpha: float) -> Rational:
        """Delay-free closed-form admittance including the Cf branch.

        alpha = 0 returns the reduced passive form directly; the unreduced
        expression has an exactly cancelling integrator pair there.
        """
        if alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        cf_term = Rational(Poly([0.0, self.Cf]), ONE)
        if alpha == 0.0:
            return self.constant_impedance_admittance() + cf_term
        gc = self.compensator.rational()
        gvd = self.control_to_output()
        n_cv = gc.num * gvd.num                    # compensator*plant numerator
        d_cv = gc.den * gvd.den
        np_dc = Poly([1.0, self.R * self.C]) * gc.den
        num = np_dc.scale(self.Vm / (self.L * self.C)) - n_cv.scale(alpha * self.H)
        den = d_cv.scale(self.Vm) + n_cv.scale(alpha * self.H)
        core = Rational(num.scale(self.D * self.D / self.R), den)
        return core + cf_term

    def admittance(self, alpha: float):
        """Pointwise-evaluable admittance; honors the compensator delay."""
        base = self.rational_admittance(alpha)
        if self.compensator.delay == 0.0 or alpha == 0.0:
            return base
        return LoopDelayedAdmittance(
            zd_inv=self.constant_impedance_admittance(),
            zn_inv=self.cpl_conductance,
            loop=self.loop_gain(alpha),
            delay=self.compensator.delay,
            cf=self.Cf,
            undelayed=base,
        )


def buck_admittance(model: BuckConverterModel, alpha: float):
    return model.admittance(alpha)


# --------------------------------------------------------------------------
# boost converter (average current mode with outer voltage loop)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CurrentCompensator:
    """G_ci(s) = G_cm (1 + w_c1/s) / (1 + s/w_c2)."""

    G_cm: float
    w_c1: float
    w_c2: float

    def __post_init__(self):
        if min(self.G_cm, self.w_c1, self.w_c2) <= 0.0:
            raise ValueError("current compensator gains/frequencies must be positive")


@dataclass(frozen=True)
class VoltageCompensator:
    """G_cv(s) = G_vm (1 + w_v1/s)."""

    G_vm: float
    w_v1: float

    def __post_init__(self):
        if min(self.G_vm, self.w_v1) <= 0.0:
            raise ValueError("voltage compensator gains/frequencies must be positive")


@dataclass(frozen=True)
class BoostConverterModel:
    """Averaged boost converter under average-current control.

    V is the input voltage and enters the duty-to-output and duty-to-current
    gains directly (Gvd0 = V/Dp, Gid0 = 2V/(Dp^2 R)). The canonical
    second-order denominator uses w0 = Dp/sqrt(LC) and Q = Dp R sqrt(C/L).
    The homotopy parameter scales both compensator gains (G_cm and G_vm), so
    alpha = 0 opens every loop and leaves the passive rectifier-side RLC
    admittance G_ig + Cf*s; keeping the current loop closed at alpha = 0
    would leave a small negative-real-part band, breaking the definitely
    stable anchor.
    """

    V: float
    R: float
    L: float
    C: float
    Dp: float
    current_comp: CurrentCompensator
    voltage_comp: VoltageCompensator
    Cf: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.Dp < 1.0:
            raise ValueError("complementary duty cycle must lie in (0, 1)")
        if min(self.V, self.R, self.L, self.C) <= 0.0:
            raise ValueError("V, R, L, C must be positive")
        if self.Cf < 0.0:
            raise ValueError("filter capacitance must be nonnegative")

    @property
    def w0(self) -> float:
        return self.Dp / math.sqrt(self.L * self.C)

    @property
    def Q(self) -> float:
        return self.Dp * self.R * math.sqrt(self.C / self.L)

    @property
    def V_out(self) -> float:
        return self.V / self.Dp

    def with_voltage(self, V: float) -> "BoostConverterModel":
        return BoostConverterModel(V, self.R, self.L, self.C, self.Dp,
                                   self.current_comp, self.voltage_comp, self.Cf)

    def _canonical(self):
        w0, Q = self.w0, self.Q
        d = Poly([1.0, 1.0 / (Q * w0), 1.0 / (w0 * w0)])
        Dp, R = self.Dp, self.R
        n_vd = Poly([1.0, -self.L / (Dp * Dp * R)]).scale(self.V / Dp)
        n_id = Poly([1.0, R * self.C / 2.0]).scale(2.0 * self.V / (Dp * Dp * R))
        n_vg = Poly([1.0 / Dp])
        n_ig = Poly([1.0, R * self.C]).scale(1.0 / (Dp * Dp * R))
        return d, n_vd, n_id, n_vg, n_ig

    def rational_admittance(self, alpha: float) -> Rational:
        if alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        d, n_vd, n_id, n_vg, n_ig = self._canonical()
        cc, vc = self.current_comp, self.voltage_comp
        cf_term = Rational(Poly([0.0, self.Cf]), ONE)
        if alpha == 0.0:
            # All loops open: the passive input admittance of the power stage.
            return Rational(n_ig, d) + cf_term
        n_ci = Poly([cc.w_c1, 1.0]).scale(alpha * cc.G_cm)
        d_ci = Poly([0.0, 1.0, 1.0 / cc.w_c2])
        n_cv = Poly([vc.w_v1, 1.0]).scale(alpha * vc.G_vm)
        d_cv = Poly([0.0, 1.0])
        # The cross term n_vd n_ig - n_id n_vg equals -(V/(Dp^3 R)) * d
        # identically, so the canonical denominator factor cancels out of the
        # closed-loop numerator. Build the cancelled form: leaving the common
        # factor in would plant a spurious lightly damped pole/zero pair.
        cross_gain = self.V / (self.Dp ** 3 * self.R)
        num = n_ig * d_cv * d_ci - (n_cv * n_ci).scale(cross_gain)
        den = d_cv * d_ci * d + n_ci * n_id * d_cv + n_cv * n_ci * n_vd
        return Rational(num, den) + cf_term

    admittance = rational_admittance


def boost_admittance(model: BoostConverterModel, alpha: float) -> Rational:
    return model.admittance(alpha)


# --------------------------------------------------------------------------
# abstract regulated load (second-order plant in PI feedback)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PlantPILoad:
    """Load defined by a second-order plant h0 closed through a PI gain.

    Y(s, alpha) = h0 / (1 + alpha K (1 + 1/(s tau_i)) h0),
    h0(s) = 1 / (s^2 + 2 zeta wn s + wn^2).
    """

    wn: float
    zeta: float
    K: float
    tau_i: float

    def plant(self) -> Rational:
        return Rational(ONE, Poly([self.wn * self.wn, 2.0 * self.zeta * self.wn, 1.0]))

    def rational_admittance(self, alpha: float) -> Rational:
        if alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        if alpha == 0.0:
            return self.plant()
        Kp = alpha * self.K
        ti = self.tau_i
        den = Poly([Kp, (self.wn * self.wn + Kp) * ti,
                    2.0 * self.zeta * self.wn * ti, ti])
        return Rational(Poly([0.0, ti]), den)

    admittance = rational_admittance


# --------------------------------------------------------------------------
# phase response
# --------------------------------------------------------------------------

def phase_response(y, omega) -> np.ndarray | float:
    """Four-quadrant phase of y(j omega) in degrees, range (-180, 180].

    No unwrapping: the certificate works on raw angles; 180 deg denotes the
    negative real axis.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("phase response requires omega > 0")
    v = np.asarray(y(1j * w))
    if np.any(np.abs(v) == 0.0):
        raise ValueError("zero-magnitude response has no phase")
    deg = np.degrees(np.arctan2(v.imag, v.real))
    # atan2 returns -180 for (-x, -0); fold onto +180.
    deg = np.where(deg <= -180.0, deg + 360.0, deg)
    return deg if deg.shape else float(deg)


def underlying_rational(y) -> Rational:
    """Delay-free rational skeleton of an admittance (for pole/zero queries)."""
    if isinstance(y, Rational):
        return y
    if isinstance(y, LoopDelayedAdmittance):
        return y.undelayed
    raise DelayModelError(f"no rational skeleton for {type(y).__name__}")
