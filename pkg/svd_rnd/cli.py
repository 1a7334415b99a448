"""CLI entry point for svd-rnd."""

import argparse
import logging

import torch
import yaml
from pydantic import ValidationError

from svd_rnd import __version__, config
from svd_rnd.errors import InputValidationError, NumericalError
from svd_rnd.scripts import prepare_data, rank_selection, score_detector, train_detector

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svd-rnd",
        description="Out-of-distribution detection with SVD-blurred random network distillation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in (prepare_data, rank_selection, train_detector, score_detector):
        module.add_parsers(subparsers)
    return parser


def _one_line(error: Exception) -> str:
    text = str(error).strip()
    return text.splitlines()[0] if text else type(error).__name__


def main(argv: list[str] | None = None) -> int:
    """Parse arguments, run one subcommand and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else config.LOG_LEVEL,
        format="%(levelname)s: %(message)s",
    )
    for issue in config.validate_config():
        logger.warning(f"⚠️  {issue}")
    config.ensure_directories()
    torch.set_num_threads(max(1, config.NUM_THREADS))

    try:
        return args.func(args) or EXIT_OK
    except NumericalError as e:
        logger.error(f"❌ {_one_line(e)}")
        return EXIT_NUMERICAL
    except ValidationError as e:
        logger.error(f"❌ Invalid configuration: {_one_line(e)}")
        return EXIT_VALIDATION
    except (InputValidationError, FileNotFoundError, yaml.YAMLError) as e:
        logger.error(f"❌ {_one_line(e)}")
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
