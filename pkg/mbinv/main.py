import argparse
import sys
from typing import List, Optional

from mbinv.commands import COMMANDS
from mbinv.config import get_settings
from mbinv.exceptions import MarkovMatrixError
from mbinv.utils.logger import setup_logging

settings = get_settings()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.APP_NAME,
        description="Structured inversion of Markov covariance matrices and BLUE estimation",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    logger = setup_logging()
    args = build_parser().parse_args(argv)
    logger.info("command_starting", command=args.command, env=settings.ENV)

    try:
        return args.handler(args)
    except MarkovMatrixError as e:
        logger.error(f"{args.command}_failed", error=str(e), exit_code=e.exit_code)
        sys.stderr.write(f"{settings.APP_NAME} {args.command}: {e}\n")
        return e.exit_code
    except (OSError, ValueError) as e:
        # unreadable files, malformed JSON/CSV, schema validation
        logger.error(f"{args.command}_failed", error=str(e), exit_code=1)
        sys.stderr.write(f"{settings.APP_NAME} {args.command}: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
