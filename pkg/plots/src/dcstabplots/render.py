"""Render dcstab CSV artifacts into figures.

Four plot kinds, one per CSV schema:

* sectors    - shaded admissible-rotation bands [-theta-90, -theta+90] per
               component against log frequency, one panel per alpha slice;
               loss of band overlap marks certificate failure.
* locus      - eigenmode positions in the complex plane, colored by alpha.
* criteria   - minor-loop-gain trace in the complex plane with the unit
               circle, the Re = -1/GM boundary, and the phase-margin wedge.
* timeseries - nodal voltage (and branch current) step responses.

Rendering is pure with respect to the input CSV: no physics is recomputed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("sectors", "locus", "criteria", "timeseries")


class RenderError(ValueError):
    pass


@dataclass
class PlotSpec:
    csv_path: Path
    kind: str
    out_path: Path
    alphas: list = field(default_factory=list)   # alpha slices for sector panels
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown plot kind {self.kind!r}; "
                              f"expected one of {KINDS}")


def _read_csv(path) -> dict:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RenderError(f"{path}: empty file (no header)")
        rows = list(reader)
    cols = {}
    for j, name in enumerate(header):
        vals = []
        for row in rows:
            raw = row[j] if j < len(row) else ""
            try:
                vals.append(float(raw))
            except ValueError:
                vals.append(raw)
        cols[name] = vals
    return cols


def _need(cols: dict, names, path) -> None:
    missing = [n for n in names if n not in cols]
    if missing:
        raise RenderError(
            f"{path}: missing columns {missing}; found {sorted(cols)}")


def render(spec: PlotSpec) -> Path:
    cols = _read_csv(spec.csv_path)
    fig = {
        "sectors": _render_sectors,
        "locus": _render_locus,
        "criteria": _render_criteria,
        "timeseries": _render_timeseries,
    }[spec.kind](cols, spec)
    spec.out_path = Path(spec.out_path)
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return spec.out_path


_BAND_COLORS = ("0.45", "tab:red", "tab:blue", "tab:green", "tab:orange",
                "tab:purple")


def _render_sectors(cols, spec: PlotSpec):
    _need(cols, ("component", "alpha", "omega", "theta_deg",
                 "sector_lo", "sector_hi"), spec.csv_path)
    comp = np.asarray(cols["component"], dtype=object)
    alpha = np.asarray(cols["alpha"], dtype=float)
    omega = np.asarray(cols["omega"], dtype=float)
    lo = np.asarray(cols["sector_lo"], dtype=float)
    hi = np.asarray(cols["sector_hi"], dtype=float)

    slices = spec.alphas or sorted(set(alpha.tolist()))
    n = max(len(slices), 1)
    ncol = min(n, 2)
    nrow = (n + ncol - 1) // ncol
    fig, axes = plt.subplots(nrow, ncol, figsize=(6.4 * ncol, 3.4 * nrow),
                             squeeze=False, sharey=True)
    components = sorted(set(comp.tolist()))
    for i, a in enumerate(slices):
        ax = axes[i // ncol][i % ncol]
        sel_a = np.isclose(alpha, a, rtol=1e-9, atol=1e-12)
        for ci, cname in enumerate(components):
            sel = sel_a & (comp == cname)
            if not np.any(sel):
                continue
            order = np.argsort(omega[sel])
            w = omega[sel][order]
            ax.fill_between(w, lo[sel][order], hi[sel][order],
                            color=_BAND_COLORS[ci % len(_BAND_COLORS)],
                            alpha=0.35, label=cname, linewidth=0)
        ax.set_xscale("log")
        ax.set_ylim(-270.0, 270.0)
        ax.set_xlabel(r"$\omega$ [rad/s]")
        ax.set_ylabel(r"admissible rotation $\phi$ [deg]")
        ax.set_title(rf"$\alpha$ = {a:g}")
        ax.grid(True, which="both", alpha=0.25)
        if i == 0:
            ax.legend(loc="upper right", fontsize=8)
    for j in range(len(slices), nrow * ncol):
        axes[j // ncol][j % ncol].set_axis_off()
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


def _render_locus(cols, spec: PlotSpec):
    _need(cols, ("alpha", "re", "im"), spec.csv_path)
    alpha = np.asarray(cols["alpha"], dtype=float)
    re = np.asarray(cols["re"], dtype=float)
    im = np.asarray(cols["im"], dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    if alpha.size:
        sc = ax.scatter(re, im, c=alpha, s=12, cmap="viridis")
        fig.colorbar(sc, ax=ax, label=r"$\alpha$")
    ax.axvline(0.0, color="k", linewidth=0.8)
    ax.set_xlabel(r"Re $s_0$ [rad/s]")
    ax.set_ylabel(r"Im $s_0$ [rad/s]")
    ax.set_title(spec.title or "eigenmode locus")
    ax.grid(True, alpha=0.25)
    fig.tight_layout()
    return fig


def _render_criteria(cols, spec: PlotSpec, GM: float = 1.0, PM: float = 60.0):
    _need(cols, ("omega", "re_Tm", "im_Tm"), spec.csv_path)
    re = np.asarray(cols["re_Tm"], dtype=float)
    im = np.asarray(cols["im_Tm"], dtype=float)
    good = np.isfinite(re) & np.isfinite(im)
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    th = np.linspace(0, 2 * np.pi, 400)
    ax.plot(np.cos(th) / GM, np.sin(th) / GM, "r-", linewidth=1.2,
            label=f"unity circle (GM={GM:g})")
    ax.axvline(-1.0 / GM, color="g", linewidth=1.2,
               label=f"opposing bound Re=-{1/GM:g}")
    r = np.linspace(1.0 / GM, 10.0, 10)
    for sgn in (1.0, -1.0):
        ang = np.radians(180.0 - sgn * PM)
        ax.plot(r * np.cos(ang), r * np.sin(ang), "b--", linewidth=1.0,
                label=f"phase margin {PM:g} deg" if sgn > 0 else None)
    if np.any(good):
        ax.plot(re[good], im[good], "k--", linewidth=1.0, label="minor loop gain")
    lim = 3.0
    if np.any(good):
        lim = min(10.0, max(3.0, 1.2 * np.percentile(np.hypot(re[good], im[good]), 90)))
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.set_aspect("equal")
    ax.set_xlabel(r"Re $T_m$")
    ax.set_ylabel(r"Im $T_m$")
    ax.set_title(spec.title or "minor-loop-gain criteria")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, alpha=0.25)
    fig.tight_layout()
    return fig


def _render_timeseries(cols, spec: PlotSpec):
    if "t" not in cols:
        raise RenderError(f"{spec.csv_path}: missing column 't'")
    t = np.asarray(cols["t"], dtype=float) * 1e3
    vcols = [c for c in cols if c.startswith("v_")]
    icols = [c for c in cols if c.startswith("i_")]
    nrow = 2 if icols else 1
    fig, axes = plt.subplots(nrow, 1, figsize=(7.2, 3.0 * nrow),
                             squeeze=False, sharex=True)
    ax = axes[0][0]
    for c in vcols:
        ax.plot(t, cols[c], linewidth=0.9, label=c.replace("v_bus_", "bus "))
    ax.set_ylabel("voltage deviation [V]")
    if vcols:
        ax.legend(fontsize=7, ncol=3)
    ax.grid(True, alpha=0.25)
    if icols:
        ax2 = axes[1][0]
        for c in icols:
            ax2.plot(t, cols[c], linewidth=0.9, label=c)
        ax2.set_ylabel("current deviation [A]")
        ax2.grid(True, alpha=0.25)
    axes[-1][0].set_xlabel("t [ms]")
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig
