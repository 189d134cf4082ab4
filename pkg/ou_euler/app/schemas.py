from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import settings
from .domain import NormalizationMode
from .services.flow import OBSERVABLES
from .services.kernel import CATALOG


class Command(str, Enum):
    VERIFY_HERMITE = "verify-hermite"
    VERIFY_COEFFS = "verify-coeffs"
    VERIFY_FIELD = "verify-field"
    SAMPLE = "sample"
    MOMENTS = "moments"
    DISPERSIVE = "dispersive"
    EVOLVE = "evolve"
    QUASI_INVARIANCE = "quasi-invariance"
    KERNEL_BOUNDS = "kernel-bounds"
    PARTICLE = "particle"


DEFAULT_T_FINAL = 0.1
# the particle command pairs its transport study with the t = 0.2 horizon
T_FINAL_DEFAULTS = {Command.PARTICLE: 0.2}


# --- Run configuration ---
class RunConfig(BaseModel):
    """Flat run configuration: TOML file values, then command-line flags on top."""
    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    command: Command
    N: int = 4
    c: float = 0.5
    c_values: Optional[List[float]] = None
    gamma: float = 1.0
    t_final: Optional[float] = None
    tol: float = 1e-9
    M: int = 1000
    seed: int = 0
    output_dir: str = settings.OUTPUT_DIR
    threads: Optional[int] = None
    normalization: NormalizationMode = NormalizationMode.NORMALIZED
    table_cache: Optional[str] = None

    # sampling / measure
    real_mode: bool = False
    epsilon: float = 0.5
    lam: float = 0.1
    p: float = 10.0 / 3.0
    max_index: int = 40

    # flow
    observable: Optional[str] = None
    initial_mode: List[int] = Field(default_factory=lambda: [1, 1])
    t_reverse: float = 0.5

    # kernel
    order: int = 3
    vorticity: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    pairs: int = 10000
    steps: int = 20
    particle_tol: float = 2e-2

    @field_validator("c")
    @classmethod
    def _c_range(cls, v: float) -> float:
        if not (0.0 < v < 1.0):
            raise ValueError("c must lie in (0, 1)")
        return v

    @field_validator("c_values")
    @classmethod
    def _c_values_range(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(not (0.0 < x < 1.0) for x in v):
            raise ValueError("every c must lie in (0, 1)")
        return v

    @field_validator("gamma")
    @classmethod
    def _gamma_positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("gamma must be positive")
        return v

    @field_validator("N")
    @classmethod
    def _basis_size(cls, v: int) -> int:
        if v < 1:
            raise ValueError("N must be at least 1")
        return v

    @field_validator("M", "pairs", "steps")
    @classmethod
    def _counts(cls, v: int) -> int:
        if v < 1:
            raise ValueError("sample counts must be at least 1")
        return v

    @field_validator("tol")
    @classmethod
    def _tol_range(cls, v: float) -> float:
        if not (1e-12 <= v <= 1e-3):
            raise ValueError("tol must lie in [1e-12, 1e-3]")
        return v

    @field_validator("t_final", "t_reverse")
    @classmethod
    def _times(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v < 0:
            raise ValueError("times must be non-negative")
        return v

    @field_validator("width", "particle_tol", "lam", "epsilon")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("initial_mode")
    @classmethod
    def _mode(cls, v: List[int]) -> List[int]:
        if len(v) != 2 or min(v) < 0 or sum(v) == 0:
            raise ValueError("initial_mode must be two non-negative integers, not both zero")
        return v

    @field_validator("observable")
    @classmethod
    def _observable(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and v not in OBSERVABLES:
            raise ValueError(f"observable must be one of {OBSERVABLES}")
        return v

    @field_validator("vorticity")
    @classmethod
    def _vorticity(cls, v: str) -> str:
        if v not in CATALOG + ("zero",):
            raise ValueError(f"vorticity must be one of {CATALOG + ('zero',)}")
        return v

    @field_validator("threads")
    @classmethod
    def _threads(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v < 1:
            raise ValueError("threads must be at least 1")
        return v

    @field_validator("order")
    @classmethod
    def _order(cls, v: int) -> int:
        if v not in (1, 2, 3):
            raise ValueError("series order must be 1, 2 or 3")
        return v

    @model_validator(mode="after")
    def _default_horizon(self) -> "RunConfig":
        if self.t_final is None:
            self.t_final = T_FINAL_DEFAULTS.get(self.command, DEFAULT_T_FINAL)
        return self


# --- Run reports ---
class CheckResult(BaseModel):
    name: str
    passed: bool
    measured: Optional[float] = None
    tolerance: Optional[float] = None
    detail: Optional[str] = None


class RunManifest(BaseModel):
    run_id: str
    command: str
    status: str
    config: Dict[str, Any]
    versions: Dict[str, str]
    started_at: datetime
    wall_clock_seconds: float
    checks: List[CheckResult]
    artifacts: List[str]
    logs: List[str]


class RunSummarySchema(BaseModel):
    run_id: str
    command: str
    status: str
    created_at: datetime
    completed_at: Optional[datetime] = None
    check_count: int = 0
    failed_checks: int = 0

    model_config = ConfigDict(from_attributes=True)
