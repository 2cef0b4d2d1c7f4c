"""Command line entry point: ``rfan run <config> [--out DIR] [--seeds N] [--jobs K]``."""

from __future__ import annotations

import argparse
import sys

from .harness import run_from_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfan", description="Run simulated two-stage trial experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run every design in a config file and write results")
    run.add_argument("config", help="INI experiment file")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--seeds", type=int, help="number of seeds (overrides the config)")
    run.add_argument("--jobs", type=int, help="worker processes for seeds")
    run.add_argument("-q", "--quiet", action="store_true", help="no progress lines")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    return run_from_config(args.config, out=args.out, seeds=args.seeds, jobs=args.jobs, log=log)


if __name__ == "__main__":
    sys.exit(main())
