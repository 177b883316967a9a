"""
Command-line interface.
"""

import argparse

from lipbound import __version__
from lipbound.cli.commands import bound, convert, empirical, spectrum, train

COMMANDS = (train, bound, empirical, convert, spectrum)


def build_parser() -> argparse.ArgumentParser:
    """Top-level parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="lipbound",
        description="Trivial, tight and empirical Lipschitz bounds for feed-forward networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        command.register(subparsers)
    return parser
