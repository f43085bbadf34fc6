"""Command-line entry point.

One subcommand per experiment kind plus `plot`, which renders figures from a
previously written result CSV. Exit codes: 0 success, 1 runtime failure,
2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .exceptions import ConfigError, ExperimentError
from .harness import KINDS, ExperimentSpec, aggregate, compare_benchmarks, \
    run_experiment
from .scenario import SystemConfig, load_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irslat",
        description="Latency optimization for a double-IRS wireless-powered "
                    "IoT uplink, with benchmark sweeps and plotting.")
    sub = parser.add_subparsers(dest="command", required=True)

    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="YAML system configuration file")
        p.add_argument("--variant", default="optimized",
                       help="benchmark variant; a comma list runs a paired "
                            "comparison")
        p.add_argument("--grid", help="comma-separated grid values")
        p.add_argument("--realizations", type=int, default=1,
                       help="independent channel realizations per grid point")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--parallelism", type=int, default=1,
                       help="worker processes")

    p = sub.add_parser("plot", help="render figures from a result CSV")
    p.add_argument("csv", help="result CSV written by an experiment run")
    p.add_argument("--out-dir", default=".", help="directory for the PNGs")
    return parser


def _parse_grid(text):
    if not text:
        return ()
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"bad grid value in {text!r}") from exc


def _run(args) -> int:
    if args.command == "plot":
        from .plots import render
        for path in render(args.csv, args.out_dir):
            print(path)
        return 0

    config = load_config(args.config) if args.config else SystemConfig()
    variants = [v.strip() for v in args.variant.split(",") if v.strip()]
    spec = ExperimentSpec(kind=args.command, config=config,
                          variant=variants[0], grid=_parse_grid(args.grid),
                          realizations=args.realizations, seed=args.seed,
                          out=args.out, parallelism=args.parallelism)
    if len(variants) > 1:
        _, summary = compare_benchmarks(spec, variants)
        for row in summary.rows:
            gap = row["gap_vs_first_pct"]
            gap_txt = f" gap={gap:+.1f}%" if gap != "" else ""
            print(f"{row['variant']:24s} grid={row['grid_value']!s:8s} "
                  f"mean={row['mean_objective_s']:.6g}s"
                  f" stderr={row['stderr_s']:.2g}{gap_txt}")
        return 0

    table = run_experiment(spec)
    for g in aggregate(table):
        print(f"{g['variant']:24s} grid={g['grid_value']!s:8s} n={g['n']:3d} "
              f"mean={g['mean']:.6g}s stderr={g['stderr']:.2g}")
    if args.out:
        print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ExperimentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
