"""Command-line entry point: ``polyfluct --config run.ini``."""
from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError, PolyfluctError
from .experiments import RUNNERS, run_validate

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="polyfluct",
        description="Equilibrium fluctuations and relaxation of an anchored 1-D polymer chain.",
    )
    parser.add_argument("--config", required=True, help="INI experiment configuration")
    parser.add_argument("--output", help="output directory (overrides run.output_dir)")
    parser.add_argument("--seed", type=int, help="64-bit seed (overrides run.seed)")
    parser.add_argument("--engine", choices=("langevin", "fp"), help="relaxation engine")
    parser.add_argument("--quiet", action="store_true", help="suppress the summary table")
    return parser


def _table(rows, quiet):
    if quiet:
        return
    width = max((len(str(k)) for k, _ in rows), default=0)
    for key, value in rows:
        print(f"{str(key):<{width}}  {value}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.output is not None:
        overrides["run.output_dir"] = args.output
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.engine is not None:
        overrides["numerics.engine"] = args.engine
    try:
        cfg = load_config(args.config, overrides)
        if cfg.experiment == "validate":
            passed, checks = run_validate(cfg)
            _table([(f"[{'PASS' if c.passed else 'FAIL'}] {c.module}: {c.name}", f"{c.value:.3e} (limit {c.limit:.3e})")
                    for c in checks], args.quiet)
            if not passed:
                failing = [c.name for c in checks if not c.passed]
                print("failing invariants: " + "; ".join(failing), file=sys.stderr)
                return EXIT_VALIDATION
            return EXIT_OK
        summary = RUNNERS[cfg.experiment](cfg)
        _table(summary.items(), args.quiet)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PolyfluctError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
