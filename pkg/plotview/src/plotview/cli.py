"""Command-line front end: ``plotview <run-dir> --kind ... --out <path>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import KINDS, FigureRequest, PlotDataError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotview",
        description="Render figures from a signflow run directory.")
    parser.add_argument("run_dir", help="directory with run CSV artifacts")
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="figure kind to render")
    parser.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        summary = render(FigureRequest(run_dir=Path(args.run_dir),
                                       kind=args.kind, out=Path(args.out)))
    except PlotDataError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 2
    print(f"{summary['kind']}: wrote {summary['out']} "
          f"(panels={summary['panels']}, curves={summary['curves']})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
