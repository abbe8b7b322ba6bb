"""CLI: ``plot trajectories|moments|comparison <run-dir> [--out DIR]``."""

from __future__ import annotations

import argparse
import sys

from .figures import PlotSpec, plot_comparison, plot_moments, plot_trajectories
from .io import SchemaError

FAMILIES = {
    "trajectories": plot_trajectories,
    "moments": plot_moments,
    "comparison": plot_comparison,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plot", description=__doc__)
    parser.add_argument("family", choices=sorted(FAMILIES))
    parser.add_argument("run_dir", help="completed run directory")
    parser.add_argument("--out", default=None, help="output image directory (default: <run-dir>/figures)")
    parser.add_argument(
        "--times", type=float, nargs="+", default=None,
        help="trajectory panel times (default: 0.001 0.1 1 10)",
    )
    parser.add_argument(
        "--spin-range", type=float, nargs=2, default=None, metavar=("LO", "HI"),
        help="trajectory spin colorbar range (default: -0.5 0.5)",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kwargs = {"run_dir": args.run_dir}
    if args.out:
        kwargs["out_dir"] = args.out
    if args.times:
        kwargs["panel_times"] = tuple(args.times)
    if args.spin_range:
        kwargs["spin_range"] = tuple(args.spin_range)
    spec = PlotSpec(**kwargs)
    try:
        written = FAMILIES[args.family](args.run_dir, spec)
    except SchemaError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
