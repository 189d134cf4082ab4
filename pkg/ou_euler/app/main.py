"""
Command-line entry point.

Every command runs in its own directory <output_dir>/<timestamp>-<command>-<id>,
is registered in the run database, and ends with a manifest.json listing its
configuration, package versions, checks and artifacts.

Exit status: 0 all checks passed, 1 a check failed or a numerical error occurred,
2 invalid input or configuration.
"""

import argparse
import logging
import os
import platform
import sys
import time
import uuid

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 fallback, same API
    import tomli as tomllib
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import matplotlib
import numpy as np
import pandas as pd
import pydantic
import scipy
import sqlalchemy
from pydantic import ValidationError

from .commands import dynamics, kernel, runs, sampling, verify
from .commands.base import CommandRun, RunLog
from .config import settings
from .database import get_session
from .domain import NormalizationMode
from .models import CheckRecord, ExperimentRun
from .schemas import RunConfig, RunManifest
from .services.errors import ConfigurationError, InvalidArgumentError, OUEError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

HANDLERS = {**verify.HANDLERS, **sampling.HANDLERS, **dynamics.HANDLERS, **kernel.HANDLERS}

# argparse destinations that are not RunConfig fields
_NON_CONFIG = {"command", "config", "verbose", "quiet"}


def build_parser() -> argparse.ArgumentParser:
    verbosity = argparse.ArgumentParser(add_help=False)
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")

    # defaults stay None so that only flags given on the command line override the file
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="TOML file with run settings")
    common.add_argument("--N", dest="N", type=int, default=None, help="Galerkin box size (0 <= k1, k2 <= N)")
    common.add_argument("--c", dest="c", type=float, default=None, help="Gaussian scale c in (0, 1)")
    common.add_argument("--c-values", dest="c_values", type=float, nargs="+", default=None,
                        help="Several scales for sweeps")
    common.add_argument("--gamma", type=float, default=None, help="Inverse temperature of the measure")
    common.add_argument("--t", dest="t_final", type=float, default=None, help="Final time")
    common.add_argument("--tol", type=float, default=None, help="Integrator relative tolerance")
    common.add_argument("--M", dest="M", type=int, default=None, help="Monte Carlo sample count")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--output-dir", dest="output_dir", default=None)
    common.add_argument("--threads", type=int, default=None, help="Worker threads (default: OUE_THREADS or all cores)")
    common.add_argument("--normalization", choices=[m.value for m in NormalizationMode], default=None)
    common.add_argument("--table-cache", dest="table_cache", default=None,
                        help="Directory for cached interaction tables")

    parser = argparse.ArgumentParser(prog="ou-euler", description=settings.PROJECT_NAME)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.PROJECT_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    parents = [verbosity, common]
    verify.register(subparsers, parents)
    sampling.register(subparsers, parents)
    dynamics.register(subparsers, parents)
    kernel.register(subparsers, parents)
    runs.register(subparsers, [verbosity])
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else getattr(logging, settings.LOG_LEVEL, logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", force=True)


def read_config_file(path: Path, command: str) -> Dict[str, Any]:
    """Top-level keys apply to every command; a table named after the command overrides them."""
    if not path.is_file():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid TOML: {exc}") from exc
    values = {k: v for k, v in data.items() if not isinstance(v, dict)}
    section = data.get(command)
    if isinstance(section, dict):
        values.update(section)
    return values


def load_config(args: argparse.Namespace) -> RunConfig:
    values: Dict[str, Any] = {}
    if args.config is not None:
        values.update(read_config_file(args.config, args.command))
    values.update({k: v for k, v in vars(args).items() if k not in _NON_CONFIG and v is not None})
    values["command"] = args.command
    return RunConfig(**values)


def prepare_output_dir(output_dir: str) -> Path:
    path = Path(output_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"output directory {path} cannot be created: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigurationError(f"output directory {path} is not writable")
    return path


def package_versions() -> Dict[str, str]:
    return {
        "ou_euler": settings.PROJECT_VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "matplotlib": matplotlib.__version__,
        "pydantic": pydantic.VERSION,
        "sqlalchemy": sqlalchemy.__version__,
    }


def run(config: RunConfig) -> int:
    """Execute one command and record it; returns the exit status."""
    out = prepare_output_dir(config.output_dir)
    run_id = str(uuid.uuid4())
    started = datetime.now()
    run_dir = out / f"{started:%Y%m%d-%H%M%S}-{config.command.value}-{run_id[:8]}"
    try:
        run_dir.mkdir(parents=True)
    except OSError as exc:
        raise ConfigurationError(f"run directory {run_dir} cannot be created: {exc}") from exc

    log = RunLog(run_id)
    db = get_session(out)
    record = ExperimentRun(
        run_id=run_id,
        command=config.command.value,
        status="PROCESSING",
        run_dir=str(run_dir),
        config=config.model_dump(mode="json"),
    )
    db.add(record)
    db.commit()

    cmd = CommandRun(config, run_id, run_dir, log)
    clock = time.perf_counter()
    status, code = "PASSED", EXIT_OK
    try:
        log(f"Starting {config.command.value}: N={config.N}, c={config.c:g}, gamma={config.gamma:g}, "
            f"seed={config.seed}, threads={cmd.threads}")
        HANDLERS[config.command](cmd)
        if not cmd.passed:
            status, code = "FAILED", EXIT_FAILED
    except (InvalidArgumentError, ConfigurationError) as exc:
        log(f"Invalid input: {exc}", logging.ERROR)
        status, code = "ERROR", EXIT_USAGE
    except OUEError as exc:
        log(f"{type(exc).__name__}: {exc}", logging.ERROR)
        status, code = "ERROR", EXIT_FAILED
    except Exception as exc:
        logger.exception("Unexpected failure in %s", config.command.value)
        log(f"Unexpected error: {exc}", logging.ERROR)
        status, code = "ERROR", EXIT_FAILED

    elapsed = time.perf_counter() - clock
    passed = sum(1 for c in cmd.checks if c.passed)
    log(f"{status}: {passed}/{len(cmd.checks)} checks passed in {elapsed:.2f}s; artifacts in {run_dir}")

    if cmd.report:
        cmd.json("report.json", cmd.report)
    manifest_path = cmd.path("manifest.json")
    manifest = RunManifest(
        run_id=run_id,
        command=config.command.value,
        status=status,
        config=config.model_dump(mode="json"),
        versions=package_versions(),
        started_at=started,
        wall_clock_seconds=elapsed,
        checks=cmd.checks,
        artifacts=cmd.artifacts,
        logs=log.buffer,
    )
    manifest_path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")

    try:
        record.status = status
        record.completed_at = datetime.utcnow()
        record.logs = "\n".join(log.buffer)
        record.checks = [
            CheckRecord(name=c.name, passed=c.passed, measured=c.measured, tolerance=c.tolerance, detail=c.detail)
            for c in cmd.checks
        ]
        db.commit()
    finally:
        db.close()
    return code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    if args.command == runs.LIST_RUNS:
        return runs.list_runs(args.output_dir, args.status, args.limit, args.run_id)

    try:
        config = load_config(args)
    except ValidationError as exc:
        logger.error("Invalid configuration:\n%s", exc)
        return EXIT_USAGE
    except ConfigurationError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE

    try:
        return run(config)
    except ConfigurationError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
