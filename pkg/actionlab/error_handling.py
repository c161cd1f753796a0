"""
Error handling for the cognitive action laboratory.
Provides the exception hierarchy raised by the numerical modules and a
centralized handler the suite runner uses to log failures and keep going.
"""

import logging
from enum import Enum
from typing import Any, Callable, Dict, Optional


class ErrorSeverity(Enum):
    """How loudly a failure is logged."""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    """Which part of a run failed."""
    DOMAIN = "domain"
    PARAMETER = "parameter"
    SHAPE = "shape"
    DIVERGENCE = "divergence"
    HYPOTHESIS = "hypothesis"
    CONFIGURATION = "configuration"
    FILE_SYSTEM = "file_system"
    SYSTEM = "system"


_LOG_LEVELS = {
    ErrorSeverity.CRITICAL: logging.CRITICAL,
    ErrorSeverity.HIGH: logging.ERROR,
    ErrorSeverity.MEDIUM: logging.WARNING,
    ErrorSeverity.LOW: logging.INFO,
}


class LabError(Exception):
    """Base exception for the laboratory.

    Subclasses fix their category and a default severity; callers may
    still raise the severity of an individual error.
    """
    category = ErrorCategory.SYSTEM
    default_severity = ErrorSeverity.HIGH

    def __init__(self, message: str, severity: Optional[ErrorSeverity] = None,
                 cause: Optional[Exception] = None, category: Optional[ErrorCategory] = None):
        super().__init__(message)
        self.message = message
        self.severity = severity or self.default_severity
        self.cause = cause
        if category is not None:
            self.category = category

    def __str__(self):
        return f"[{self.category.value.upper()}] {self.message}"


class DomainError(LabError):
    """Evaluation outside the domain of a signal or map (negative time, beyond a table)."""
    category = ErrorCategory.DOMAIN


class ParameterError(LabError):
    """Invalid or excluded parameter value."""
    category = ErrorCategory.PARAMETER


class ShapeError(LabError):
    """Dimension mismatch between inputs, weights and models."""
    category = ErrorCategory.SHAPE


class DivergenceError(LabError):
    """Non-finite or runaway state during integration."""
    category = ErrorCategory.DIVERGENCE

    def __init__(self, message: str, step: Optional[int] = None, t: Optional[float] = None, **kwargs):
        super().__init__(message, **kwargs)
        self.step = step
        self.t = t


class HypothesisViolationError(LabError):
    """A hypothesis of a certificate or bound does not hold for the given input."""
    category = ErrorCategory.HYPOTHESIS
    default_severity = ErrorSeverity.MEDIUM


class ConfigurationError(LabError):
    """Invalid suite configuration."""
    category = ErrorCategory.CONFIGURATION
    default_severity = ErrorSeverity.CRITICAL


class FileSystemError(LabError):
    """Unreadable tables, unwritable output directories."""
    category = ErrorCategory.FILE_SYSTEM
    default_severity = ErrorSeverity.MEDIUM


class ErrorHandler:
    """Logs failures by severity and keeps per-kind counts for the suite summary."""

    def __init__(self, logger: Optional[logging.Logger] = None):
        self.logger = logger or logging.getLogger(__name__)
        self.error_counts: Dict[str, int] = {}

    def handle_error(self, error: Exception, context: str = "", reraise: bool = False) -> LabError:
        """Log an error by severity, count it, and return its standardized form."""
        lab_error = error if isinstance(error, LabError) else self._standardize_error(error, context)
        self._log_error(lab_error, context)

        key = f"{lab_error.category.value}:{type(error).__name__}"
        self.error_counts[key] = self.error_counts.get(key, 0) + 1

        if reraise:
            raise lab_error from error
        return lab_error

    @staticmethod
    def _standardize_error(error: Exception, context: str) -> LabError:
        kind = type(error).__name__
        text = str(error)
        if isinstance(error, FloatingPointError) or any(w in text.lower() for w in ("overflow", "nan", "inf")):
            return DivergenceError(f"Numerical failure in {context}: {text}", cause=error)
        if isinstance(error, OSError):
            return FileSystemError(f"Cannot access files in {context}: {text}", cause=error)
        if isinstance(error, (ValueError, TypeError, KeyError)):
            return ParameterError(f"Invalid value in {context}: {kind}: {text}", cause=error)
        return LabError(f"Unexpected failure in {context}: {kind}: {text}", cause=error)

    def _log_error(self, error: LabError, context: str) -> None:
        message = f"{context}: {error}"
        if error.cause:
            message += f" (caused by: {error.cause})"
        level = _LOG_LEVELS[error.severity]
        with_trace = error.cause if level >= logging.ERROR else None
        self.logger.log(level, message, exc_info=with_trace)

    def get_error_stats(self) -> dict:
        """Error counts for the end-of-suite summary."""
        counts = self.error_counts
        return {
            "total_errors": sum(counts.values()),
            "error_breakdown": dict(counts),
            "most_common": max(counts.items(), key=lambda item: item[1]) if counts else None,
        }


def safe_call(func: Callable, *args, fallback: Any = None, context: str = "", **kwargs):
    """Call func, logging a warning and returning fallback if it raises."""
    try:
        return func(*args, **kwargs)
    except Exception as e:
        logging.getLogger(__name__).warning("%s failed: %s", context or func.__name__, e)
        return fallback
