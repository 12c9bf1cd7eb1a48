"""Command-line entry point: ``modelavg train | grid | speedup``."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from loguru import logger

from .config import parse_config
from .errors import HarnessError, ModelAvgError
from .harness import compare_grid, run, write_grid
from .metrics import compute_speedup, read_metrics

_LOG_FORMAT = "<green>{time:HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | <level>{message}</level>"


def _configure_logging(verbose: bool, quiet: bool) -> None:
    logger.remove()
    level = "DEBUG" if verbose else "WARNING" if quiet else "INFO"
    logger.add(sys.stderr, format=_LOG_FORMAT, level=level)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelavg",
        allow_abbrev=False,
        description="Data-parallel neural network training with periodic model averaging.",
        epilog="Any setting can also be given as --<key> <value> after the subcommand.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug detail")
    parser.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", allow_abbrev=False, help="run one training job")
    train.add_argument("--config", help="key = value settings file")
    train.add_argument("--echo-config", action="store_true", help="print the resolved settings first")

    grid = sub.add_parser("grid", allow_abbrev=False, help="compare runs over the values of one setting")
    grid.add_argument("--config", help="key = value settings file")
    grid.add_argument("--axis", required=True, help="setting to vary")
    grid.add_argument("--values", required=True, help="comma-separated values")
    grid.add_argument("--seeds", type=int, default=1, help="seeds per value (default: 1)")
    grid.add_argument("--output", default="grid.csv", help="summary CSV (default: grid.csv)")
    grid.add_argument("--no-speedup", action="store_true", help="skip the serial baseline runs")
    grid.add_argument("--echo-config", action="store_true", help="print the resolved settings first")

    speedup = sub.add_parser("speedup", allow_abbrev=False, help="speedup of a parallel run over a serial one")
    speedup.add_argument("--serial", required=True, help="metrics CSV of the serial run")
    speedup.add_argument("--parallel", required=True, help="metrics CSV of the parallel run")
    return parser


def _train(args: argparse.Namespace, extra: list[str]) -> None:
    config = parse_config(args.config, extra)
    if args.echo_config:
        print(config.describe(), end="")
    result = run(config)
    print(f"cv_accuracy = {result.cv_accuracy:.4f}")
    print(f"metrics written to {result.metrics_path}")
    print(f"model written to {result.checkpoint_path}")


def _grid(args: argparse.Namespace, extra: list[str]) -> None:
    config = parse_config(args.config, extra)
    if args.echo_config:
        print(config.describe(), end="")
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    rows = compare_grid(config, args.axis, values, seeds=args.seeds, with_speedup=not args.no_speedup)
    path = write_grid(args.output, rows)
    for row in rows:
        print(
            f"{row.axis} = {row.value}: cv_accuracy {row.cv_accuracy_mean:.4f}"
            f" +- {row.cv_accuracy_std:.4f}, speedup {row.speedup:.2f}, {row.status}"
        )
    print(f"grid written to {path}")


def _speedup(args: argparse.Namespace, extra: list[str]) -> None:
    if extra:
        raise HarnessError(f"unexpected arguments {' '.join(extra)!r}")
    result = compute_speedup(read_metrics(args.serial), read_metrics(args.parallel))
    print(f"speedup = {result.speedup:.4f}")
    print(f"scaling = {result.scaling:.4f}")


_COMMANDS = {"train": _train, "grid": _grid, "speedup": _speedup}


def main(argv: Sequence[str] | None = None) -> int:
    args, extra = _build_parser().parse_known_args(argv)
    _configure_logging(args.verbose, args.quiet)
    try:
        _COMMANDS[args.command](args, extra)
    except (ModelAvgError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
