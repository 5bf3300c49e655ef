"""Exception types shared across the toolkit"""

from typing import Optional


class ToolkitError(Exception):
    """Base class for all toolkit errors"""


class DomainError(ToolkitError, ValueError):
    """Raised when an input lies outside the domain of an operation"""


class ConfigError(ToolkitError):
    """Raised for invalid or inconsistent run configuration"""


class OracleSizeError(DomainError):
    """Raised when a discretized game would be too large to enumerate"""


class LPSolverError(ToolkitError):
    """Base class for linear program failures, with iteration diagnostics"""

    status = "error"

    def __init__(self, message: str, iterations: int = 0, phase: Optional[int] = None):
        super().__init__(message)
        self.iterations = iterations
        self.phase = phase

    def diagnostics(self) -> dict:
        """Return the failure as a plain dict for reports"""
        return {
            "status": self.status,
            "message": str(self),
            "iterations": self.iterations,
            "phase": self.phase,
        }


class InfeasibleLPError(LPSolverError):
    status = "infeasible"


class UnboundedLPError(LPSolverError):
    status = "unbounded"


class IterationLimitError(LPSolverError):
    status = "iteration_limit"
