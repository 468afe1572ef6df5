"""Command-line entry point: ``figures <kind> --in <csv...> --out <image>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib.pyplot as plt

from .render import (
    KINDS,
    FigureSpec,
    render_occupancy,
    render_phase_plane,
    render_scaling,
    save_figure,
)
from .tables import SchemaError

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="figures",
        description="Render simulation CSV artifacts as publication-style "
                    "figures (raster plus vector twin).",
    )
    p.add_argument("kind", choices=list(KINDS))
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="CSV", help="input tables; kinds are recognized "
                   "by their column lists")
    p.add_argument("--out", required=True, help="output image path (.png, "
                   ".jpg, .svg, or .pdf; the twin format is written next "
                   "to it)")
    p.add_argument("--xlabel", help="x axis label override")
    p.add_argument("--ylabel", help="y axis label override")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fig = None
    try:
        spec = FigureSpec(
            kind=args.kind,
            inputs=tuple(Path(p) for p in args.inputs),
            output=Path(args.out),
            xlabel=args.xlabel,
            ylabel=args.ylabel,
        )
        if spec.kind == "phase-plane":
            fig = render_phase_plane(spec)
        elif spec.kind == "scaling":
            fig, note = render_scaling(spec)
            if note is not None:
                print(note)
        else:
            fig = render_occupancy(spec)
        for path in save_figure(fig, spec.output):
            print(f"wrote {path}")
    except SchemaError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    finally:
        if fig is not None:
            plt.close(fig)
    return 0


if __name__ == "__main__":
    sys.exit(main())
