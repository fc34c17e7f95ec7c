"""dcstab-plot: render a dcstab CSV artifact into a figure file."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcstab-plot",
                                description=__doc__.strip())
    p.add_argument("kind", choices=KINDS)
    p.add_argument("csv", help="input CSV produced by the dcstab CLI")
    p.add_argument("out", help="output image path (.png or .svg)")
    p.add_argument("--alphas", default="",
                   help="comma-separated alpha slices for sector panels")
    p.add_argument("--title", default="")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    alphas = [float(x) for x in args.alphas.split(",") if x.strip()]
    spec = PlotSpec(csv_path=args.csv, kind=args.kind, out_path=args.out,
                    alphas=alphas, title=args.title)
    try:
        out = render(spec)
    except (RenderError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
