"""
Command Line Interface
"""
import argparse
import logging
import sys
from typing import Any, List, Optional

from .controller import (
    AdaptiveController,
    EssController,
    ReplicatorController,
    SimulateController,
    SweepController,
    ThroughputController,
)
from .errors import HnomaError

EXIT_USAGE = 1


def command_run(args: Any) -> int:
    """Execute a command from arguments provided as dict or namespace.

    Programmatic entry point (tests, notebooks). Errors propagate.
    """
    if isinstance(args, dict):
        defaults = {'verb': 'run', 'config': None, 'seed': None, 'workers': None,
                    'out': None, 'format': None, 'verbose': False, 'no_cache': False}
        defaults.update(args)
        args = argparse.Namespace(**defaults)
    return dispatch(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='hnoma: evolutionary-game analysis and simulation of hybrid uplink NOMA.')
    parser.add_argument('object',
                        metavar='object',
                        type=str,
                        help='Command [ess, replicator, simulate, adaptive, sweep, throughput]')
    parser.add_argument('verb',
                        metavar='verb',
                        type=str,
                        nargs='?',
                        default='run',
                        help='Sub-command: run (default), or su-bs / su-u for adaptive')
    parser.add_argument('--config',
                        type=str,
                        help='Path to the JSON experiment config')
    parser.add_argument('--seed',
                        type=int,
                        help='Master seed (mandatory for simulate and adaptive)')
    parser.add_argument('--workers',
                        type=int,
                        help='Worker threads; never changes results')
    parser.add_argument('--out',
                        type=str,
                        help='Output directory')
    parser.add_argument('--format',
                        type=str,
                        choices=['csv', 'json'],
                        help='Output format of tabular results')
    parser.add_argument('--verbose',
                        action='store_true',
                        default=False,
                        help='Log at INFO level')
    parser.add_argument('--no-cache',
                        dest='no_cache',
                        action='store_true',
                        default=False,
                        help='Do not read or write the ESS cache (sweep)')
    return parser


def command_input(argv: Optional[List[str]] = None) -> int:
    """Parse command-line arguments, run the command and return its exit code.

    Exit codes: 0 success, 1 usage or config error (nothing written),
    2 the run completed but the mathematical solution is invalid.
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 after --help
        return EXIT_USAGE if exc.code not in (0, None) else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        return dispatch(args)
    except (HnomaError, ValueError) as exc:
        print("[%s] error: %s" % (args.object, exc), file=sys.stderr)
        return EXIT_USAGE


def dispatch(args) -> int:
    """Map object/verb to a controller method and call it.

    Raises:
        ValueError: If the object or verb is not recognized.
    """
    controllers = {
        'ess': {
            'run': EssController.run,
        },
        'replicator': {
            'run': ReplicatorController.run,
        },
        'simulate': {
            'run': SimulateController.run,
        },
        'adaptive': {
            'su-bs': AdaptiveController.su_bs,
            'su-u': AdaptiveController.su_u,
        },
        'sweep': {
            'run': SweepController.run,
        },
        'throughput': {
            'run': ThroughputController.run,
        },
    }
    controller = controllers.get(args.object)
    if controller:
        return call(controller.get(args.verb), args)
    raise ValueError("Invalid object {}".format(args.object))


def call(func, args) -> int:
    """Execute a controller function with the provided arguments."""
    if callable(func):
        return func(args)
    raise ValueError("Invalid action call {} on object {}".format(args.verb, args.object))
