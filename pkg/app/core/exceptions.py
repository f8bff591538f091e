"""
Error hierarchy for the inversion toolkit.

Every error carries the process exit code the CLI returns for it.
"""
from typing import Any, Dict, List, Optional


class InversionError(Exception):
    """Base class for all toolkit errors"""

    exit_code: int = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": {k: v for k, v in self.details.items() if k != "report"},
        }


# --- usage / configuration (exit 2) ---

class ConfigError(InversionError):
    exit_code = 2


class MatrixBuildError(InversionError):
    exit_code = 2


class ScalarKindError(MatrixBuildError):
    """Complex values given to a matrix tagged real"""


class DimensionMismatchError(InversionError):
    exit_code = 2


class MismatchedTargetsError(InversionError):
    exit_code = 2


class NotHermitianError(InversionError):
    exit_code = 2


class PedigreeError(InversionError):
    exit_code = 2


class EmptyHerdError(PedigreeError):
    pass


class LatticeError(InversionError):
    exit_code = 2


# --- divergence (exit 3) ---

class ZeroDiagonalError(InversionError):
    exit_code = 3

    def __init__(self, index: int):
        super().__init__(f"zero diagonal entry at index {index}; D must be non-singular", index=index)
        self.index = index


class DivergenceError(InversionError):
    """Chains grew without bound or never coupled: sp(T) >= 1 or sp(S) >= 1"""

    exit_code = 3

    def __init__(self, message: str, cycle: int = 0, trajectory: Optional[List[float]] = None, **details: Any):
        super().__init__(message, cycle=cycle, **details)
        self.cycle = cycle
        self.trajectory: List[float] = list(trajectory or [])


class NonFiniteSampleError(DivergenceError):
    def __init__(self, cycle: int):
        super().__init__(f"non-finite sample at cycle {cycle}", cycle=cycle)


class ConvergenceGateError(DivergenceError):
    pass


# --- non-convergence (exit 4) ---

class NonConvergenceError(InversionError):
    exit_code = 4

    def __init__(self, message: str, report: Any = None, **details: Any):
        super().__init__(message, report=report, **details)
        self.report = report


class BreakdownError(InversionError):
    exit_code = 4


class InsufficientSamplesError(InversionError):
    exit_code = 4


# --- I/O (exit 5) ---

class MatrixFormatError(InversionError):
    exit_code = 5


class ReportIOError(InversionError):
    exit_code = 5


# --- dense oracle (exit 6) ---

class SingularMatrixError(InversionError):
    exit_code = 6


class OrderCapExceededError(InversionError):
    exit_code = 6


EXIT_CODES = {
    0: "success",
    1: "unexpected error",
    2: "usage, configuration or target error",
    3: "divergence (sp(T) >= 1, sp(S) >= 1, zero diagonal, non-finite samples)",
    4: "non-convergence (cycle or iteration cap, solver breakdown)",
    5: "I/O error (Matrix Market, report files)",
    6: "dense oracle failure (singular matrix, order cap)",
    130: "interrupted",
}
