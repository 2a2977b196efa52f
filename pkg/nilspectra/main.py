"""Command-line entry point: python -m nilspectra.main <command> [options]."""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from nilspectra import __version__
from nilspectra.cli import cmd_correlate, cmd_norms, cmd_resonances, cmd_selftest, cmd_verify
from nilspectra.config import get_settings
from nilspectra.exceptions import ConfigError
from nilspectra.models import ExperimentConfig
from nilspectra.utils.config_parser import load_config
from nilspectra.utils.logger import get_logger, setup_logger

logger = get_logger()

COMMANDS = ("verify", "correlate", "resonances", "norms", "selftest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nilspectra",
        description="Resonance bands of partially hyperbolic Heisenberg nilmanifold automorphisms.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Override NILSPECTRA_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, required=name not in ("resonances", "selftest"),
                         help="Experiment file")
        cmd.add_argument("--out", type=Path, default=None, help="Run directory")
        cmd.add_argument("--threads", type=int, default=None, help="Worker cap")
        cmd.add_argument("--n-max", dest="n_max", type=int, default=None, help="Last correlation index")
        cmd.add_argument("--grid", type=int, default=None, help="Trapezoid grid size M")
        if name == "resonances":
            cmd.add_argument("--series", type=Path, default=None, help="correlations.csv to fit")
        if name == "selftest":
            cmd.add_argument("--seed", type=int, default=0)
    return parser


def apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    """Command-line flags win over the file, and pass the same validation."""
    threads = args.threads or (config.numerics.threads if config.numerics.threads > 1
                               else get_settings().default_threads)
    numerics = config.numerics.model_dump()
    numerics["threads"] = threads
    if args.n_max is not None:
        numerics["n_max"] = args.n_max
    if args.grid is not None:
        numerics["grid"] = args.grid
    payload = config.model_dump()
    payload["numerics"] = numerics
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"command line: {'.'.join(str(p) for p in first['loc'])}: {first['msg']}") from e


def resolve_out(config: Optional[ExperimentConfig], args: argparse.Namespace) -> Path:
    if args.out is not None:
        return args.out
    if config is not None:
        return Path(config.output.directory)
    return get_settings().output_root_path / "default"


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logger(level=args.log_level)
    logger.info(f"nilspectra {__version__}: {args.command}")

    config = None
    try:
        if args.config is not None:
            config = apply_overrides(load_config(args.config), args)
    except ConfigError as e:
        logger.error(str(e))
        print(f"error: {e}")
        return 2
    out_dir = resolve_out(config, args)

    if args.command == "verify":
        return cmd_verify(config, out_dir)
    if args.command == "correlate":
        return cmd_correlate(config, out_dir)
    if args.command == "resonances":
        return cmd_resonances(config, out_dir, args.series)
    if args.command == "norms":
        return cmd_norms(config, out_dir)
    return cmd_selftest(out_dir, args.seed)


if __name__ == "__main__":
    sys.exit(main())
