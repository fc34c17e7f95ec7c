"""Command-line driver: certify / max-alpha / locus / simulate / compare /
steady-state / sectors.

Every command writes a versioned JSON report plus CSV artifacts into the
output directory (--out, else $DCSTAB_OUT, else ./out). Outputs are
deterministic for a given seed; the seed and any randomly drawn line lengths
are echoed in the report.

Exit codes: 0 success / certificate passed; 1 certificate failed;
2 input error; 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import certification, classical, fileio, timesim
from .certification import PassivityPreconditionError, SweepGrid
from .eigenmodes import locus as run_locus, spectrum_modes
from .network import NetworkError, NoseCurveError
from .ratfun import InterpolationError, PoleHitError, RootFindingError
from .timesim import RealizationError

REPORT_SCHEMA = "dcstab-report-v1"

EXIT_OK = 0
EXIT_CERT_FAIL = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def parse_omega(spec: str) -> np.ndarray:
    """'min:max:points', log spaced."""
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError as err:
        raise fileio.InputError(f"bad --omega spec {spec!r}: want min:max:points") from err
    if lo <= 0 or hi <= lo or n < 2:
        raise fileio.InputError(f"bad --omega spec {spec!r}")
    return np.logspace(np.log10(lo), np.log10(hi), n)


def parse_alpha(spec: str) -> np.ndarray:
    """'start:step:stop' (inclusive) or an explicit comma list of values."""
    if ":" not in spec:
        try:
            vals = np.asarray(sorted(float(x) for x in spec.split(",")))
        except ValueError as err:
            raise fileio.InputError(f"bad --alpha spec {spec!r}") from err
        if vals.size == 0 or vals[0] < 0:
            raise fileio.InputError(f"bad --alpha spec {spec!r}")
        return vals
    try:
        start, step, stop = (float(x) for x in spec.split(":"))
    except ValueError as err:
        raise fileio.InputError(f"bad --alpha spec {spec!r}: want start:step:stop") from err
    if step <= 0 or stop < start or start < 0:
        raise fileio.InputError(f"bad --alpha spec {spec!r}")
    n = int(round((stop - start) / step))
    grid = start + step * np.arange(n + 1)
    if grid[-1] < stop - 1e-12 * max(1.0, stop):
        grid = np.append(grid, stop)
    grid[-1] = min(grid[-1], stop)
    return grid


def _outdir(args) -> Path:
    out = args.out or os.environ.get("DCSTAB_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _grid(args, default_alpha="0:0.05:1") -> SweepGrid:
    omegas = parse_omega(args.omega)
    alphas = parse_alpha(args.alpha if args.alpha else default_alpha)
    return SweepGrid(omegas, alphas)


def _report(outdir: Path, name: str, payload: dict) -> Path:
    payload = {"schema": REPORT_SCHEMA, **payload}
    path = outdir / name
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_net(args):
    loaded = fileio.load_network(args.net, seed=args.seed,
                                 controller=getattr(args, "controller", None))
    return loaded


def cmd_certify(args) -> int:
    outdir = _outdir(args)
    loaded = fileio.load_components(args.components)
    grid = _grid(args, default_alpha="0:0.05:1")
    net = None
    drawn = {}
    if args.net:
        ln = _load_net(args)
        net = ln.net.resolved()
        drawn = ln.drawn_lengths
    rep = certification.certify(loaded.component_set, grid,
                                margin_tol=args.margin_tol, net=net)
    results = {
        "passed": rep.passed,
        "margin_deg": rep.margin_deg,
        "max_feasible_alpha": rep.max_feasible_alpha,
        "violation": ({"omega": rep.violation[0], "alpha": rep.violation[1],
                       "components": list(rep.violation[2])}
                      if rep.violation else None),
        "worst_point": ({"omega": rep.worst_point[0], "alpha": rep.worst_point[1]}
                        if rep.worst_point else None),
        "zero_freq_ok": rep.zero_freq_ok,
        "zero_freq_checked": rep.zero_freq_checked,
        "margin_tol": rep.margin_tol,
        "notes": rep.notes,
        "components": loaded.ids,
    }
    path = _report(outdir, "certify_report.json", {
        "command": "certify", "seed": args.seed, "drawn_lengths_km": drawn,
        "inputs": {"components": str(args.components),
                   "net": str(args.net) if args.net else None,
                   "omega": args.omega, "alpha": args.alpha,
                   "margin_tol": args.margin_tol},
        "results": results,
    })
    print(f"certificate {'PASS' if rep.passed else 'FAIL'}: "
          f"max feasible alpha {rep.max_feasible_alpha:g}, "
          f"worst margin {rep.margin_deg:.4f} deg -> {path}")
    return EXIT_OK if rep.passed else EXIT_CERT_FAIL


def cmd_max_alpha(args) -> int:
    outdir = _outdir(args)
    loaded = fileio.load_components(args.components)
    grid = _grid(args, default_alpha="0:0.05:1")
    astar, wbreak = certification.max_alpha(loaded.component_set, grid,
                                            margin_tol=args.margin_tol)
    path = _report(outdir, "max_alpha_report.json", {
        "command": "max-alpha", "seed": args.seed,
        "inputs": {"components": str(args.components), "omega": args.omega,
                   "alpha": args.alpha, "margin_tol": args.margin_tol},
        "results": {"alpha_star": astar,
                    "omega_break": None if np.isnan(wbreak) else wbreak,
                    "grid_capped": bool(np.isnan(wbreak)),
                    "components": loaded.ids},
    })
    print(f"max alpha = {astar:.6g}"
          + ("" if np.isnan(wbreak) else f" (breaks near omega {wbreak:.6g} rad/s)")
          + f" -> {path}")
    return EXIT_OK


def cmd_locus(args) -> int:
    outdir = _outdir(args)
    ln = _load_net(args)
    net = ln.net.resolved()
    alphas = parse_alpha(args.alpha if args.alpha else "0:0.5:10")
    trace = run_locus(net, alphas, spectrum=args.spectrum)
    csv_path = outdir / "locus.csv"
    write_csv(csv_path, ["alpha", "re", "im"], trace.rows())
    results = {
        "marginal_alpha": trace.marginal_alpha,
        "max_real_part": {f"{a:g}": float(m)
                          for a, m in zip(trace.alphas, trace.max_real_part)},
        "stable_throughout": bool(np.all(trace.max_real_part < 0.0)),
        "spectrum": args.spectrum,
    }
    path = _report(outdir, "locus_report.json", {
        "command": "locus", "seed": args.seed, "drawn_lengths_km": ln.drawn_lengths,
        "inputs": {"net": str(args.net), "alpha": args.alpha,
                   "controller": args.controller},
        "results": results, "artifacts": [csv_path.name],
    })
    msg = ("no crossing on the sweep" if trace.marginal_alpha is None
           else f"marginal alpha = {trace.marginal_alpha:.4f}")
    print(f"locus over {len(alphas)} alphas: {msg} -> {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    outdir = _outdir(args)
    ln = _load_net(args)
    net = ln.net.resolved()
    sc = ln.scenario
    step_bus = args.step_bus if args.step_bus is not None else sc.get("step_bus")
    if step_bus is None:
        raise fileio.InputError("no step bus: pass --step-bus or add a "
                                "[scenario] block to the network file")
    delta_v = args.delta_v if args.delta_v is not None else sc.get("delta_v", 0.5)
    t_end = args.t_end if args.t_end is not None else sc.get("t_end", 0.05)
    dt = args.dt if args.dt is not None else sc.get("dt")
    alpha = args.sim_alpha if args.sim_alpha is not None else sc.get("alpha", 1.0)
    resp = timesim.simulate_step(net, int(step_bus), float(delta_v),
                                 float(t_end), dt=dt, alpha=float(alpha))
    csv_path = outdir / "timeseries.csv"
    header = (["t"] + [f"v_bus_{b}" for b in resp.bus_ids]
              + [f"i_{i}_{j}" for i, j in resp.edges])
    rows = (tuple([resp.t[k]] + list(resp.v[k]) + list(resp.i[k]))
            for k in range(resp.t.size))
    write_csv(csv_path, header, rows)
    ts = timesim.settling_time(resp)
    path = _report(outdir, "simulate_report.json", {
        "command": "simulate", "seed": args.seed, "drawn_lengths_km": ln.drawn_lengths,
        "inputs": {"net": str(args.net), "step_bus": int(step_bus),
                   "delta_v": float(delta_v), "t_end": float(t_end),
                   "dt": dt, "alpha": float(alpha)},
        "results": {"settling_time_s": ts,
                    "final_deviation_v": {str(b): float(resp.v[-1, j])
                                          for j, b in enumerate(resp.bus_ids)}},
        "artifacts": [csv_path.name],
    })
    print(f"simulated {t_end:g}s: settling {ts*1e3:.2f} ms -> {path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    outdir = _outdir(args)
    ln = _load_net(args)
    net = ln.net.resolved()
    bus = net.bus(args.bus)
    if bus.device is None or bus.kind != "load":
        raise fileio.InputError(f"bus {args.bus} carries no load device to test")
    omegas = parse_omega(args.omega)
    load_y = bus.device.admittance(args.cmp_alpha)
    mlg = classical.minor_loop_gain(net, args.bus, load_y, args.cmp_alpha, omegas)
    verdicts = classical.all_criteria(mlg, GM=args.gm, PM=args.pm)
    csv_path = outdir / "criteria.csv"
    write_csv(csv_path,
              ["omega", "re_Tm", "im_Tm", "abs_Tm", "arg_Tm_deg", "violations"],
              classical.mlg_rows(mlg, verdicts))
    stable = bool(np.all(spectrum_modes(net, args.cmp_alpha).real < 0.0))
    path = _report(outdir, "compare_report.json", {
        "command": "compare", "seed": args.seed, "drawn_lengths_km": ln.drawn_lengths,
        "inputs": {"net": str(args.net), "bus": args.bus, "alpha": args.cmp_alpha,
                   "GM": args.gm, "PM": args.pm, "omega": args.omega},
        "results": {
            "criteria": {k: {"passed": v.passed,
                             "violation_count": len(v.violations),
                             "params": v.params}
                         for k, v in verdicts.items()},
            "system_stable": stable,
        },
        "artifacts": [csv_path.name],
    })
    summary = ", ".join(f"{k}={'pass' if v.passed else 'FAIL'}"
                        for k, v in verdicts.items())
    print(f"minor-loop criteria at bus {args.bus}: {summary}; "
          f"system stable={stable} -> {path}")
    return EXIT_OK


def cmd_steady_state(args) -> int:
    outdir = _outdir(args)
    ln = _load_net(args)
    net = ln.net.resolved()
    ss = net.steady_state()
    csv_path = outdir / "steady_state.csv"
    rows = [(b.id, b.kind, float(ss.V0[k]), float(ss.I0[k]))
            for k, b in enumerate(net.buses)]
    write_csv(csv_path, ["bus", "kind", "v0", "injection_a"], rows)
    path = _report(outdir, "steady_state_report.json", {
        "command": "steady-state", "seed": args.seed,
        "drawn_lengths_km": ln.drawn_lengths,
        "inputs": {"net": str(args.net)},
        "results": {"residual": ss.residual,
                    "source_currents_a": ss.source_currents,
                    "load_voltages_v": ss.load_voltages},
        "artifacts": [csv_path.name],
    })
    print(f"steady state solved (residual {ss.residual:.2e}) -> {path}")
    return EXIT_OK


def cmd_sectors(args) -> int:
    outdir = _outdir(args)
    loaded = fileio.load_components(args.components)
    grid = _grid(args, default_alpha="0:0.25:1")
    csv_path = outdir / "sectors.csv"
    write_csv(csv_path,
              ["component", "alpha", "omega", "theta_deg", "sector_lo",
               "sector_hi", "margin_deg"],
              certification.sector_rows(loaded.component_set, grid,
                                        margin_tol=args.margin_tol))
    path = _report(outdir, "sectors_report.json", {
        "command": "sectors", "seed": args.seed,
        "inputs": {"components": str(args.components), "omega": args.omega,
                   "alpha": args.alpha},
        "results": {"components": loaded.ids},
        "artifacts": [csv_path.name],
    })
    print(f"sector sweep written -> {csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dcstab",
        description="Decentralized phase-sector stability certification for "
                    "DC microgrids, with centralized cross-checks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, net=False, components=False):
        sp.add_argument("--seed", type=int, default=0,
                        help="PRNG seed for randomized line lengths")
        sp.add_argument("--out", default=None,
                        help="output directory (default $DCSTAB_OUT or ./out)")
        sp.add_argument("--omega", default="1e-1:1e7:2000",
                        help="log omega grid min:max:points [rad/s]")
        if net:
            sp.add_argument("--net", required=True, help="network TOML/JSON file")
            sp.add_argument("--controller", default=None,
                            help="compensator variant to select from the "
                                 "device tables (e.g. pi, leadlag)")
        if components:
            sp.add_argument("--components", required=True,
                            help="component table TOML/JSON file")

    sp = sub.add_parser("certify", help="run the sector certificate")
    common(sp, components=True)
    sp.add_argument("--net", default=None,
                    help="optional network for the zero-frequency check")
    sp.add_argument("--controller", default=None)
    sp.add_argument("--alpha", default="0:0.05:1", help="alpha grid start:step:stop")
    sp.add_argument("--margin-tol", type=float,
                    default=certification.DEFAULT_MARGIN_TOL,
                    help="margin below which local refinement triggers [deg]")
    sp.set_defaults(fn=cmd_certify)

    sp = sub.add_parser("max-alpha", help="largest alpha passing the certificate")
    common(sp, components=True)
    sp.add_argument("--alpha", default="0:0.05:1")
    sp.add_argument("--margin-tol", type=float,
                    default=certification.DEFAULT_MARGIN_TOL)
    sp.set_defaults(fn=cmd_max_alpha)

    sp = sub.add_parser("locus", help="eigenmode locus over an alpha sweep")
    common(sp, net=True)
    sp.add_argument("--alpha", default="0:0.5:10")
    sp.add_argument("--spectrum", choices=("state", "det"), default="state",
                    help="mode extraction route (state-space or determinant)")
    sp.set_defaults(fn=cmd_locus)

    sp = sub.add_parser("simulate", help="step-response time simulation")
    common(sp, net=True)
    sp.add_argument("--step-bus", type=int, default=None)
    sp.add_argument("--delta-v", type=float, default=None)
    sp.add_argument("--t-end", type=float, default=None)
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--alpha", dest="sim_alpha", type=float, default=None)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("compare", help="classical minor-loop-gain criteria")
    common(sp, net=True)
    sp.add_argument("--bus", type=int, required=True)
    sp.add_argument("--alpha", dest="cmp_alpha", type=float, default=1.0)
    sp.add_argument("--gm", type=float, default=classical.DEFAULT_GM)
    sp.add_argument("--pm", type=float, default=classical.DEFAULT_PM)
    sp.set_defaults(fn=cmd_compare)

    sp = sub.add_parser("steady-state", help="DC operating point")
    common(sp, net=True)
    sp.set_defaults(fn=cmd_steady_state)

    sp = sub.add_parser("sectors", help="per-component sector CSV for plotting")
    common(sp, components=True)
    sp.add_argument("--alpha", default="0:0.25:1")
    sp.add_argument("--margin-tol", type=float,
                    default=certification.DEFAULT_MARGIN_TOL)
    sp.set_defaults(fn=cmd_sectors)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (fileio.InputError, NetworkError, FileNotFoundError) as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (NoseCurveError, RootFindingError, InterpolationError,
            PoleHitError, RealizationError, PassivityPreconditionError,
            np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
