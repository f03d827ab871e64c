"""Command-line figure rendering.

    xdiff-plot convergence   --in convergence.csv [fit.csv] --out fig.png [--sqrt-axis]
    xdiff-plot longtime      --in series.csv --out fig.png
    xdiff-plot entropy-decay --in series.csv [fit.csv] --out fig.png

Exit code 0 on success, 1 for unusable inputs (the message names the
offending file and column).  Cross-check disagreements between the
data and a supplied fit file are warnings on stderr, not failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import KINDS, PlotError, PlotJob, render
from .tables import TableError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xdiff-plot",
        description="Render figures from xdiff CSV output.",
    )
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument(
        "--in", dest="inputs", nargs="+", required=True, metavar="CSV",
        help="data CSV, optionally followed by the matching fit CSV",
    )
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument(
        "--sqrt-axis", action="store_true",
        help="plot convergence data against sqrt(h)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = PlotJob(
            inputs=tuple(Path(p) for p in args.inputs),
            output=Path(args.out),
            kind=args.kind,
            sqrt_axis=args.sqrt_axis,
        )
        info = render(job)
    except (PlotError, TableError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for warning in info.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    note = f" (slope {info.annotation_slope:.4f})" if info.annotation_slope is not None else ""
    print(f"wrote {args.out}{note}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
