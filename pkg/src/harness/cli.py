"""
Command-line entrypoint: ``spectral-lab <command> [--config FILE] [--set key=value ...]``.

Exit codes: 0 pass, 1 check failure, 2 config error, 3 numerical abort.
"""
import argparse
import asyncio
import logging
import sys
from typing import List, Optional, Sequence

from dotenv import load_dotenv

from src.config.run_config import CONFIG_MODELS, load_run_config
from src.config.settings import Settings, get_settings
from src.harness.runner import NEGATIVE_CONTROLS, CommandResult, ExperimentRunner
from src.utils.errors import ConfigError, NumericalInstabilityError, OracleSizeError, StepRejectedError

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ABORT = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral-lab", description="Spectral stability lab for Boussinesq-MHD flow near Couette flow"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in CONFIG_MODELS:
        sub = subparsers.add_parser(name, help=CONFIG_MODELS[name].__doc__)
        sub.add_argument("--config", help="JSON run config")
        sub.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
            help="Override a config entry; dotted keys reach nested entries",
        )
        sub.add_argument("--output-dir", help="Directory for summaries, ledgers and checkpoints")
        if name == "certify":
            sub.add_argument("--negative-control", choices=NEGATIVE_CONTROLS, help="Corrupted multiplier that must fail")
        if name == "linear":
            sub.add_argument("--oracle", action="store_true", help="Cross-check against the dense oracle")
        if name == "nonlinear":
            sub.add_argument("--sweep", action="store_true", help="Run the eps sweep down to the first pass")
    return parser


def _flag_overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.overrides)
    if getattr(args, "negative_control", None):
        overrides.append(f"negative_control={args.negative_control}")
    if getattr(args, "oracle", False):
        overrides.append("oracle=true")
    if getattr(args, "sweep", False):
        overrides.append("run_sweep=true")
    return overrides


async def run_command(args: argparse.Namespace, settings: Settings) -> CommandResult:
    config = load_run_config(args.command, args.config, _flag_overrides(args))
    runner = ExperimentRunner(settings=settings, output_dir=args.output_dir)
    return await runner.dispatch(args.command, config)


def main(argv: Optional[Sequence[str]] = None, settings: Optional[Settings] = None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    load_dotenv()
    settings = settings or get_settings()
    logging.basicConfig(level=settings.LOG_LEVEL)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_PASS if e.code == 0 else EXIT_CONFIG_ERROR

    try:
        result = asyncio.run(run_command(args, settings))
    except (ConfigError, OracleSizeError) as e:
        logger.error(f"Configuration error: {e}")
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except NumericalInstabilityError as e:
        logger.error(f"Numerical abort: {e}")
        print(f"numerical abort: {e}; state dumped to {e.dump_path}", file=sys.stderr)
        return EXIT_NUMERICAL_ABORT
    except StepRejectedError as e:
        logger.error(f"Numerical abort: {e}")
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERICAL_ABORT

    for name, path in sorted(result.outputs.items()):
        print(f"{name}: {path}")
    print(f"{result.command}: {'PASS' if result.passed else 'FAIL'}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
