"""Impedance-ratio stability criteria on the minor loop gain.

The minor loop gain at an interconnection bus is the ratio of the grid-side
output impedance to the candidate load input impedance, equivalently
T_m = Y_load / Y_grid. Three classical checks run on its frequency samples:

* middlebrook: |T_m| < 1/GM everywhere;
* gain-margin/phase-margin: |T_m| >= 1/GM tolerated only where the phase
  stays at least PM degrees away from 180;
* opposing argument: Re T_m > -1/GM everywhere.

These certify a specific interconnection; the sector certificate certifies
arbitrary ones, so a stable system can fail all three.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_GM = 1.0
DEFAULT_PM = 60.0


@dataclass(frozen=True)
class MinorLoopGain:
    omegas: np.ndarray
    values: np.ndarray           # complex T_m samples
    flagged: np.ndarray          # True where the interior solve was singular

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        if np.any(np.diff(w) <= 0):
            raise ValueError("omega samples must ascend")

    @property
    def clean(self):
        good = ~self.flagged & np.isfinite(self.values)
        return self.omegas[good], self.values[good]


@dataclass
class CriterionVerdict:
    kind: str
    passed: bool
    violations: list             # omega values violating the bound
    params: dict = field(default_factory=dict)


def minor_loop_gain(net, bus_id: int, load_admittance, alpha: float,
                    omegas) -> MinorLoopGain:
    """T_m(w) = Y_load(jw) / Y_grid(jw) at the connection bus.

    The grid admittance is the Schur-reduced network seen from the bus with
    its own shunt removed, so an already-planned converter at the bus does
    not count against itself.
    """
    omegas = np.asarray(omegas, dtype=float)
    y_o = net.effective_admittance(bus_id, alpha, exclude_shunt_at_bus=True)
    grid = np.asarray([y_o(w) for w in omegas])
    load = np.asarray(load_admittance(1j * omegas))
    flagged = ~np.isfinite(grid) | (np.abs(grid) == 0.0)
    vals = np.where(flagged, np.nan + 0j, load / np.where(flagged, 1.0, grid))
    return MinorLoopGain(omegas=omegas, values=vals, flagged=flagged)


def criterion_check(mlg: MinorLoopGain, kind: str,
                    GM: float = DEFAULT_GM, PM: float = DEFAULT_PM) -> CriterionVerdict:
    w, T = mlg.clean
    mag = np.abs(T)
    if kind == "middlebrook":
        bad = mag >= 1.0 / GM
        params = {"GM": GM}
    elif kind == "gmpm":
        phase = np.degrees(np.angle(T))
        dist180 = np.abs((phase - 180.0 + 180.0) % 360.0 - 180.0)
        bad = (mag >= 1.0 / GM) & (dist180 < PM)
        params = {"GM": GM, "PM": PM}
    elif kind == "opposing":
        bad = T.real <= -1.0 / GM
        params = {"GM": GM}
    else:
        raise ValueError(f"unknown criterion {kind!r}")
    return CriterionVerdict(kind=kind, passed=not bool(np.any(bad)),
                            violations=list(w[bad]), params=params)


def all_criteria(mlg: MinorLoopGain, GM: float = DEFAULT_GM,
                 PM: float = DEFAULT_PM) -> dict:
    return {k: criterion_check(mlg, k, GM, PM)
            for k in ("middlebrook", "gmpm", "opposing")}


def nyquist_winding(mlg: MinorLoopGain) -> int:
    """Winding number of 1 + T_m along the sampled positive-frequency arc,
    mirrored by conjugate symmetry (desk-scale encirclement surrogate)."""
    _, T = mlg.clean
    z = 1.0 + T
    ang = np.unwrap(np.angle(z))
    half = (ang[-1] - ang[0]) / (2.0 * np.pi)
    return int(round(2.0 * half))


def mlg_rows(mlg: MinorLoopGain, verdicts: dict):
    """CSV rows: (omega, re, im, abs, arg_deg, violations)."""
    viol_sets = {k: set(np.round(v.violations, 12)) for k, v in verdicts.items()}
    for i, w in enumerate(mlg.omegas):
        v = mlg.values[i]
        if mlg.flagged[i] or not np.isfinite(v):
            yield (float(w), np.nan, np.nan, np.nan, np.nan, "singular")
            continue
        tags = [k for k, s in viol_sets.items() if np.round(w, 12) in s]
        yield (float(w), float(v.real), float(v.imag), float(abs(v)),
               float(np.degrees(np.angle(v))), "+".join(tags))
