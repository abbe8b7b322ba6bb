"""Command-line experiment runner.

Subcommands::

    floesim sim particle <config.yaml>   particle run from a config file
    floesim sim hydro <config.yaml>      continuum run from a config file
    floesim sim example1                 preset: constant-ocean relaxation
    floesim sim example2                 preset: particle/continuum comparison
    floesim compare <floes.csv> <fields.csv>
    floesim validate                     property suites; nonzero exit on failure

The output root is ``--out``, else the ``FLOESIM_OUT`` environment variable,
else ``./runs``.  ``--seed``, ``--dt``, ``--T`` and ``--threads`` override the
corresponding config keys and are echoed in the run manifest.  ``--threads``
caps worker threads; results are independent of the thread count by design.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .config import SimConfig, load_config
from .output import write_json
from .runner import compare_csvs, run_example1, run_example2, run_hydro, run_particle
from .validate import run_all_suites


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--dt", type=float, default=None, help="override the time step")
    parser.add_argument("--T", type=float, default=None, dest="t_final", help="override the final time")
    parser.add_argument("--threads", type=int, default=None, help="cap worker threads")
    parser.add_argument("--out", default=None, help="output root directory")


def _flag_overrides(args) -> dict:
    overrides = {}
    for key, attr in (("seed", "seed"), ("dt", "dt"), ("t_final", "t_final"), ("threads", "threads")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floesim", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"floesim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run a simulation")
    sim_sub = sim.add_subparsers(dest="target", required=True)
    for target in ("particle", "hydro"):
        p = sim_sub.add_parser(target, help=f"{target} run from a config file")
        p.add_argument("config", help="YAML config path")
        _add_common_flags(p)
    for target in ("example1", "example2"):
        p = sim_sub.add_parser(target, help=f"preset {target}")
        _add_common_flags(p)
        if target == "example2":
            p.add_argument(
                "--paper-scale",
                action="store_true",
                help="10^4 floes and a 50x50 continuum grid instead of desk scale",
            )

    cmp_p = sub.add_parser("compare", help="compare a floe CSV with a field CSV")
    cmp_p.add_argument("particle_csv")
    cmp_p.add_argument("hydro_csv")
    cmp_p.add_argument("--out", default=None, help="write the JSON report here")

    val = sub.add_parser("validate", help="run the property suites")
    val.add_argument("--seed", type=int, default=None, help="base seed for the suites")
    return parser


def _run_from_config(args) -> int:
    from .config import apply_overrides

    cfg = load_config(args.config)
    cfg, echo = apply_overrides(cfg, _flag_overrides(args))
    if args.target == "particle":
        run_dir, out = run_particle(cfg, args.out, overrides_echo=echo)
        print(f"wrote {run_dir} ({len(out.moments)} moment samples, {len(out.snapshots)} snapshots)")
    else:
        run_dir, snapshots = run_hydro(cfg, args.out, overrides_echo=echo)
        print(f"wrote {run_dir} ({len(snapshots)} field snapshots)")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "sim":
        if args.target in ("particle", "hydro"):
            return _run_from_config(args)
        overrides = _flag_overrides(args)
        overrides.pop("seed", None)
        seed = args.seed if args.seed is not None else 0
        if args.target == "example1":
            run_dir, _, summary = run_example1(seed=seed, overrides=overrides, out_root=args.out)
            print(f"wrote {run_dir}")
            print(json.dumps(summary, indent=2, sort_keys=True))
        else:
            run_dir, report = run_example2(
                seed=seed,
                overrides=overrides,
                paper_scale=args.paper_scale,
                out_root=args.out,
            )
            print(f"wrote {run_dir}")
            for entry in report["comparisons"]:
                print(
                    f"t={entry['time']:g}: u relative L2 = {entry['u']['relative']:.4g} "
                    f"(empty cells: {entry['u']['empty_cells']})"
                )
        return 0

    if args.command == "compare":
        report = compare_csvs(args.particle_csv, args.hydro_csv)
        text = json.dumps(report, indent=2, sort_keys=True)
        if args.out:
            write_json(args.out, report)
            print(f"wrote {args.out}")
        else:
            print(text)
        return 0

    if args.command == "validate":
        results = run_all_suites(seed=args.seed)
        failed = [r for r in results if not r.passed]
        for result in results:
            print(result.line())
            if result.violation is not None:
                print("  violating instance:", json.dumps(result.violation, sort_keys=True))
        return 1 if failed else 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
