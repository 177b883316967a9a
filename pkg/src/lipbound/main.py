"""
Process entry point for the ``lipbound`` console script.
"""

import logging
import sys

from pydantic import ValidationError

from lipbound.cli import build_parser
from lipbound.config import settings
from lipbound.domain.errors import ConfigurationError, LipboundError

logger = logging.getLogger("lipbound")


def configure_logging(verbose: bool = False) -> None:
    """Log to stderr at the configured level; ``verbose`` forces DEBUG."""
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv: list[str] | None = None) -> int:
    """
    Run one subcommand.

    Returns:
        Exit code: 0 success, 2 usage/configuration, 3 data or format
        error, 4 numerical failure
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = argv

    configure_logging(args.verbose)
    logger.info("lipbound %s started", args.command)
    try:
        code = args.func(args)
    except ValidationError as e:
        error = ConfigurationError(f"invalid option: {e.errors()[0]['msg']}")
        logger.error("%s", error)
        return error.exit_code
    except LipboundError as e:
        logger.error("%s", e)
        return e.exit_code
    logger.info("lipbound %s finished", args.command)
    return code


if __name__ == "__main__":
    sys.exit(main())
