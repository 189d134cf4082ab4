"""
Exception hierarchy shared by the numerical services and the command layer.
"""

from typing import Any, Optional


class OUEError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidArgumentError(OUEError, ValueError):
    """An operation was called outside its domain."""


class ConfigurationError(OUEError):
    """The run configuration is unusable (maps to exit status 2)."""


class ResourceBudgetError(OUEError):
    """Tabulation would exceed the configured memory budget."""

    def __init__(self, max_index: int, required_mb: float, budget_mb: float):
        self.max_index = max_index
        self.required_mb = required_mb
        self.budget_mb = budget_mb
        super().__init__(
            f"interaction table for N={max_index} needs ~{required_mb:.0f} MB "
            f"(budget {budget_mb:.0f} MB)"
        )


class IntegrationFailure(OUEError):
    """The adaptive integrator could not reach the requested time."""

    def __init__(self, message: str, last_time: float, last_state: Optional[Any] = None):
        self.last_time = last_time
        self.last_state = last_state
        super().__init__(f"{message} (last good t={last_time:.6g})")


class ResolutionError(OUEError):
    """Quadrature or Monte Carlo resolution is insufficient for the requested accuracy."""

    def __init__(self, message: str, where: Optional[float] = None):
        self.where = where
        super().__init__(message if where is None else f"{message} at {where:.6g}")
