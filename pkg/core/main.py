import argparse
import sys

from pydantic import ValidationError

from commands import maxg, mc, peb, uwb, validate
from config import settings
from errors import ConfigError, LinepebError
from utils.logging import configure_logging, get_logger
from utils.monitoring import export_metrics

# Setup logger
logger = get_logger("main")

COMMANDS = (peb, maxg, mc, uwb, validate)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description=settings.APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        type=str.upper,
        help="override LOG_LEVEL for this run",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.add_parser(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Run one subcommand and map failures to exit codes (2 config, 3 numerical, 4 validation)."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        configure_logging(args.log_level)
    logger.info(f"Running {args.command}")
    try:
        return args.handler(args)
    except LinepebError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except (ValidationError, ValueError) as e:
        logger.error(f"Configuration error: {e}")
        return ConfigError.exit_code
    finally:
        export_metrics()


if __name__ == "__main__":
    sys.exit(main())
