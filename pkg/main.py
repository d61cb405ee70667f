#!/usr/bin/env python3
"""
coupleman: Monte Carlo laboratory for Brownian couplings on negatively
curved model spaces.

    python main.py bounds --config configs/bounds.json
    python main.py simulate --config configs/disk_benchmark.json --out data/results/disk.csv
    python main.py verify comparison_1d --format json --out data/results/comparison_1d.json
    python main.py caratheodory --t 2
    python main.py wilson 100 100
"""

import argparse
import logging
import logging.handlers
import sys
from pathlib import Path

import config
from database.db_manager import DatabaseManager
from errors import ConfigError, PreconditionError
from experiments.config_schema import FORMATS, SPACES, STRATEGIES, ESTIMATES, SUITES, as_dict, load_config
from experiments.reporting import print_report, to_json, write_report
from experiments.runner import run_command

logger = logging.getLogger("main")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERNAL = 4
EXIT_INTERRUPTED = 130


def setup_logging(verbose=False):
    handler = logging.handlers.RotatingFileHandler(
        config.LOGS_DIR / "coupleman.log",
        maxBytes=config.LOG_FILE_SIZE,
        backupCount=config.LOG_FILE_COUNT,
    )
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, config.LOG_LEVEL),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[handler, logging.StreamHandler()]
    )


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='JSON config for the run')
    common.add_argument('--seed', type=int, default=config.DEFAULT_SEED, help='Master seed (u64)')
    common.add_argument('--out', type=Path, help='Write the report to this path')
    common.add_argument('--threads', type=int, default=1, help='Worker threads; never changes results')
    common.add_argument('--format', choices=FORMATS, default='csv', help='Report format for --out')
    common.add_argument('--timing', action='store_true', help='Include wall-clock time in the JSON report')
    common.add_argument('--no-archive', action='store_true', help='Do not record the run in the archive')
    common.add_argument('--verbose', action='store_true', help='Log at DEBUG level')

    parser = argparse.ArgumentParser(prog='coupleman', description='Brownian coupling laboratory')
    subparsers = parser.add_subparsers(dest='command', help='Command to run')
    subparsers.required = True

    subparsers.add_parser('bounds', parents=[common], help='Evaluate closed-form comparison bounds')

    simulate_parser = subparsers.add_parser('simulate', parents=[common], help='Simulate a coupling')
    simulate_parser.add_argument('--space', choices=SPACES, help='Model space')
    simulate_parser.add_argument('--strategy', choices=STRATEGIES, help='Coupling strategy')
    simulate_parser.add_argument('--estimate', choices=ESTIMATES, help='Estimated quantity')
    simulate_parser.add_argument('--n-paths', type=int, help='Number of coupled paths')

    verify_parser = subparsers.add_parser('verify', parents=[common], help='Run an acceptance suite')
    verify_parser.add_argument('suite', choices=SUITES, help='Suite to run')
    verify_parser.add_argument('--scale', type=float, help='Multiply every path count of the suite')

    carath_parser = subparsers.add_parser('caratheodory', parents=[common],
                                          help='Estimate the Carathéodory distance by coupling')
    carath_parser.add_argument('--n-paths', type=int, help='Number of coupled paths')
    carath_parser.add_argument('--t', type=float, help='Time horizon')

    wilson_parser = subparsers.add_parser('wilson', parents=[common], help='Wilson score interval')
    wilson_parser.add_argument('k', type=int, help='Successes')
    wilson_parser.add_argument('n', type=int, help='Trials')
    wilson_parser.add_argument('--z', type=float, help='Normal quantile')

    return parser


def overrides_from(args):
    """Config fields set on the command line."""
    if args.command == 'simulate':
        return {'space': args.space, 'strategy': args.strategy, 'estimate': args.estimate,
                'n_paths': args.n_paths}
    if args.command == 'verify':
        return {'suite': args.suite, 'scale': args.scale}
    if args.command == 'caratheodory':
        return {'n_paths': args.n_paths, 't': args.t}
    if args.command == 'wilson':
        return {'k': args.k, 'n': args.n, 'z': args.z}
    return {}


def open_archive(args):
    if args.no_archive:
        return None
    try:
        db_manager = DatabaseManager()
        db_manager.init_db()
        return db_manager
    except Exception as e:
        logger.error(f"Run archive unavailable, continuing without it: {e}", exc_info=True)
        return None


def run(args):
    if args.threads < 1:
        raise ConfigError(f"--threads must be at least 1, got {args.threads}")
    if not 0 <= args.seed < 2 ** 64:
        raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")

    cfg = load_config(args.command, args.config, overrides_from(args))
    db_manager = open_archive(args)
    run_id = None
    if db_manager is not None:
        try:
            run_id = db_manager.start_run(args.command, as_dict(cfg), args.seed, args.threads,
                                          suite=getattr(cfg, 'suite', None))
        except Exception as e:
            logger.error(f"Could not archive run: {e}", exc_info=True)
            db_manager = None

    try:
        report = run_command(args.command, cfg, args.seed, args.threads)
        out = write_report(report, args.out, args.format, args.timing)
    except Exception as e:
        if db_manager is not None:
            db_manager.fail_run(run_id, e)
        raise

    print_report(report)
    if out is not None:
        print(f"\nReport written to {out}")
    if db_manager is not None:
        db_manager.finish_run(run_id, report, to_json(report, timing=True), out)
        print(f"Archived as run {run_id}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    try:
        return run(args)
    except (ConfigError, PreconditionError) as e:
        logger.error(f"{args.command}: {e}", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"{args.command}: I/O error: {e}", exc_info=True)
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_INTERRUPTED
    except Exception as e:
        logger.error(f"{args.command}: {e}", exc_info=True)
        print(f"Internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
