"""CLI: qmesh-plots <kind> <csv> -o <file> [--pattern P] [--policies a,b,c]"""

from __future__ import annotations

import argparse
import sys

from .csvio import CsvFormatError
from .figures import FIGURE_KINDS, FigureSpec, plot


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmesh-plots", description="render figures from qmesh CSV outputs"
    )
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("csv", help="sweep CSV (latency_curve, counters) or timeseries CSV")
    parser.add_argument("-o", "--out", required=True, help="output figure (.svg or .png)")
    parser.add_argument("--pattern", default=None, help="keep only rows with this pattern")
    parser.add_argument("--policies", default=None, help="comma-separated policy filter")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    policies = tuple(p for p in args.policies.split(",") if p) if args.policies else None
    spec = FigureSpec(
        csv_path=args.csv,
        kind=args.kind,
        out_path=args.out,
        pattern=args.pattern,
        policies=policies,
    )
    try:
        plot(spec)
    except (CsvFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
