"""
Command-Line Entry Point
Routes the simulate, constants, verify and plot subcommands to the CLI handler
"""
import argparse
import logging
import sys
from typing import List, Optional

from handlers.cli_handler import CLIHandler
from shared.config import Config
from shared.exceptions import ConfigurationError
from shared.utils import parse_real

LOG_FORMAT = '%(levelname)s - %(name)s - %(message)s'

logger = logging.getLogger(__name__)


def _real(text: str) -> float:
    try:
        return parse_real(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='muskat',
        description='Pseudo-spectral simulator and verification suite for the 1D Muskat interface equation',
    )
    commands = parser.add_subparsers(dest='command', required=True)

    simulate = commands.add_parser('simulate', help='run a simulation from an INI config')
    simulate.add_argument('config', help='run configuration file')

    constants = commands.add_parser('constants', help='reproduce the smallness constants')
    constants.add_argument('--delta', type=_real, default=0.0, help='exponent offset (default 0)')
    constants.add_argument('--tol', type=_real, default=1e-15, help='bisection bracket width (default 1e-15)')

    verify = commands.add_parser('verify', help='run the cross-validation battery')
    verify.add_argument('config', help='run configuration file')

    plot = commands.add_parser('plot', help='render a run directory to SVG')
    plot.add_argument('rundir', help='run directory written by simulate')
    return parser


def configure_logging():
    try:
        level = Config().get_log_level()
    except ConfigurationError as e:
        level = 'INFO'
        print(f"Ignoring environment: {e}", file=sys.stderr)
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT)
    logging.getLogger('matplotlib').setLevel(logging.WARNING)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and dispatch

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        int: process exit code
    """
    args = build_parser().parse_args(argv)
    configure_logging()
    handler = CLIHandler()
    logger.debug(f"Command: {args.command}")

    if args.command == 'simulate':
        return handler.cmd_simulate(args.config)
    elif args.command == 'constants':
        return handler.cmd_constants(args.delta, args.tol)
    elif args.command == 'verify':
        return handler.cmd_verify(args.config)
    return handler.cmd_plot(args.rundir)


if __name__ == '__main__':
    sys.exit(main())
