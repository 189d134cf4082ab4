"""
Shared plumbing for command modules: the run-log buffer and the per-run context
through which commands record checks and write artifacts.
"""

import logging
import math
from datetime import datetime
from pathlib import Path
from typing import Any, List, Optional

import pandas as pd

from ..config import settings
from ..domain import FieldContext, GalerkinBasis, GaussianParams
from ..exporter import DataExporter
from ..schemas import CheckResult, RunConfig
from ..services import coeffs, field

logger = logging.getLogger(__name__)


class RunLog:
    """Emits to the logger and keeps timestamped lines for the run record."""

    def __init__(self, run_id: str):
        self.run_id = run_id
        self.buffer: List[str] = []

    def __call__(self, msg: str, level: int = logging.INFO):
        logger.log(level, "[%s] %s", self.run_id[:8], msg)
        self.buffer.append(f"{datetime.now().isoformat()} - {msg}")


class CommandRun:
    def __init__(self, config: RunConfig, run_id: str, run_dir: Path, log: RunLog):
        self.config = config
        self.run_id = run_id
        self.run_dir = run_dir
        self.log = log
        self.checks: List[CheckResult] = []
        self.artifacts: List[str] = []
        self.report: dict = {}

    @property
    def threads(self) -> int:
        return self.config.threads or settings.threads

    @property
    def params(self) -> GaussianParams:
        return GaussianParams(self.config.c, self.config.normalization)

    def context(self, max_index: int, c: Optional[float] = None) -> FieldContext:
        params = self.params if c is None else GaussianParams(c, self.config.normalization)
        basis = GalerkinBasis.box(max_index)
        table = coeffs.cached_table(basis, self.config.table_cache, threads=self.threads)
        return field.make_context(basis, table, params, self.config.gamma)

    # --- checks ---
    def check(self, name: str, passed: bool, measured: Optional[float] = None,
              tolerance: Optional[float] = None, detail: Optional[str] = None) -> bool:
        if any(c.name == name for c in self.checks):
            raise ValueError(f"check {name!r} recorded twice")
        if measured is not None and not math.isfinite(measured):
            passed = False
            measured = None
            detail = (detail + "; " if detail else "") + "non-finite measurement"
        self.checks.append(CheckResult(name=name, passed=bool(passed), measured=measured,
                                       tolerance=tolerance, detail=detail))
        self.log(f"check {name}: {'PASS' if passed else 'FAIL'} (measured={measured}, tolerance={tolerance})",
                 logging.INFO if passed else logging.WARNING)
        return bool(passed)

    def check_at_most(self, name: str, measured: float, tolerance: float, detail: Optional[str] = None) -> bool:
        return self.check(name, math.isfinite(measured) and measured <= tolerance, float(measured), tolerance, detail)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    # --- artifacts ---
    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.run_dir / name

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        return DataExporter.export_csv(frame, self.path(name))

    def json(self, name: str, data: Any) -> Path:
        return DataExporter.export_json(data, self.path(name))
