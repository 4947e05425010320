"""
Error taxonomy for bprelab.

Every failure raised by the library is a :class:`LabError` carrying a
category and a machine-readable code, so the CLI can report it as a
structured document and pick an exit code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any


class ErrorCategory(str, Enum):
    """Error classification categories."""

    NUMERICAL = "numerical"
    DOMAIN = "domain"
    STATISTICAL = "statistical"
    CONFIGURATION = "configuration"
    GATE = "gate"
    UNKNOWN = "unknown"


class ErrorCode:
    """Machine-readable error codes."""

    # Numerical
    DEGENERATE_MATRIX = "DEGENERATE_MATRIX"
    OVERFLOW_GUARD = "OVERFLOW_GUARD"
    CALIBRATION_FAILED = "CALIBRATION_FAILED"

    # Domain
    DOMAIN_ERROR = "DOMAIN_ERROR"
    ROOT_VALUE_NONPOSITIVE = "ROOT_VALUE_NONPOSITIVE"
    NON_POSITIVE_VALUE = "NON_POSITIVE_VALUE"

    # Statistical
    INSUFFICIENT_ACCEPTANCE = "INSUFFICIENT_ACCEPTANCE"
    EMPTY_SAMPLE = "EMPTY_SAMPLE"

    # Configuration
    CONFIG_ERROR = "CONFIG_ERROR"

    # Gate
    GATE_FAILED = "GATE_FAILED"

    UNKNOWN_ERROR = "UNKNOWN_ERROR"


class ExitCode:
    """Process exit codes of the ``bprelab`` command."""

    OK = 0
    ERROR = 1
    VERDICT_FAILURE = 2


@dataclass
class ErrorResponse:
    """Structured error document printed by the CLI.

    Required: category, code, message. Optional: details.
    """

    category: str
    code: str
    message: str
    details: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        """Serialize to dictionary, omitting None optional fields."""
        result: dict[str, Any] = {
            "error": True,
            "category": self.category,
            "code": self.code,
            "message": self.message,
        }
        if self.details is not None:
            result["details"] = self.details
        return result

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class LabError(Exception):
    """Base class of every bprelab error."""

    category: ErrorCategory = ErrorCategory.UNKNOWN
    code: str = ErrorCode.UNKNOWN_ERROR

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details

    def to_response(self) -> ErrorResponse:
        details = {k: _jsonable(v) for k, v in self.details.items()} or None
        return ErrorResponse(
            category=self.category.value,
            code=self.code,
            message=str(self),
            details=details,
        )


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    try:
        return float(value)
    except (TypeError, ValueError):
        return repr(value)


class DegenerateMatrix(LabError):
    """A matrix or product has a vanishing column or image."""

    category = ErrorCategory.NUMERICAL
    code = ErrorCode.DEGENERATE_MATRIX


class OverflowGuard(LabError):
    """A population count would exceed the 64-bit integer range."""

    category = ErrorCategory.NUMERICAL
    code = ErrorCode.OVERFLOW_GUARD


class CalibrationFailed(LabError):
    """No sign change of the Lyapunov exponent was bracketed."""

    category = ErrorCategory.NUMERICAL
    code = ErrorCode.CALIBRATION_FAILED


class DomainError(LabError, ValueError):
    """An argument lies outside the domain of the operation."""

    category = ErrorCategory.DOMAIN
    code = ErrorCode.DOMAIN_ERROR


class RootValueNonpositive(LabError):
    """The harmonic function is not significantly positive at the path root."""

    category = ErrorCategory.DOMAIN
    code = ErrorCode.ROOT_VALUE_NONPOSITIVE


class NonPositiveValue(DomainError):
    """A value that must be positive (for a log fit) is not."""

    code = ErrorCode.NON_POSITIVE_VALUE


class InsufficientAcceptance(LabError):
    """Rejection sampling kept fewer samples than required."""

    category = ErrorCategory.STATISTICAL
    code = ErrorCode.INSUFFICIENT_ACCEPTANCE


class EmptySample(LabError, ValueError):
    """A statistic was requested on an empty sample."""

    category = ErrorCategory.STATISTICAL
    code = ErrorCode.EMPTY_SAMPLE


class ConfigError(LabError, ValueError):
    """Invalid configuration or input file."""

    category = ErrorCategory.CONFIGURATION
    code = ErrorCode.CONFIG_ERROR


class GateFailed(LabError):
    """Hypotheses required by a limit-theorem experiment do not hold."""

    category = ErrorCategory.GATE
    code = ErrorCode.GATE_FAILED
