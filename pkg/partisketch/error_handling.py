"""Error handling utilities for partisketch."""

import logging
import traceback
from collections.abc import Callable
from functools import wraps
from typing import Any

logger = logging.getLogger(__name__)


class PartiSketchError(Exception):
    """Base exception for partisketch."""

    def __init__(
        self,
        message: str,
        context: dict[str, Any] | None = None,
        cause: Exception | None = None,
    ):
        """Initialize error with detailed context.

        Args:
            message: Human-readable error message
            context: Additional context information
            cause: Original exception that caused this error
        """
        super().__init__(message)
        self.context = context or {}
        self.cause = cause
        # Only capture traceback if there's an actual exception
        self.timestamp = traceback.format_exc() if cause else None

    def to_dict(self) -> dict[str, Any]:
        """Convert error to dictionary for logging/serialization.

        Returns:
            Dictionary representation of the error
        """
        return {
            'error_type': self.__class__.__name__,
            'message': str(self),
            'context': self.context,
            'cause': str(self.cause) if self.cause else None,
            'timestamp': self.timestamp,
        }


class ConfigurationError(PartiSketchError):
    """Configuration and parameter-range errors."""

    def __init__(
        self,
        message: str,
        config_key: str | None = None,
        expected_type: str | None = None,
        actual_value: Any = None,
        context: dict[str, Any] | None = None,
        cause: Exception | None = None,
    ):
        """Initialize configuration error with config context.

        Args:
            message: Error message
            config_key: Configuration key or parameter name that caused the error
            expected_type: Expected type or range
            actual_value: Actual value received
            context: Additional context
            cause: Original exception
        """
        config_context = {
            'config_key': config_key,
            'expected_type': expected_type,
            'actual_value': actual_value,
            **(context or {}),
        }
        super().__init__(message, config_context, cause)


class DataProcessingError(PartiSketchError):
    """Data processing errors."""

    def __init__(
        self,
        message: str,
        data_type: str | None = None,
        processing_stage: str | None = None,
        context: dict[str, Any] | None = None,
        cause: Exception | None = None,
    ):
        """Initialize data processing error with processing context.

        Args:
            message: Error message
            data_type: Type of data being processed
            processing_stage: Stage of processing that failed
            context: Additional context
            cause: Original exception
        """
        processing_context = {
            'data_type': data_type,
            'processing_stage': processing_stage,
            **(context or {}),
        }
        super().__init__(message, processing_context, cause)


class MalformedLabelError(DataProcessingError):
    """Vertex label is empty or contains the reserved separator byte."""


class DegenerateStatsError(DataProcessingError):
    """Vertex statistics cannot enter the split objective (fv = 0 or missing)."""


class NotSplittableError(DataProcessingError):
    """A vertex list is too short to choose a split pivot."""


class MalformedQueryError(DataProcessingError):
    """Query is empty or cannot be parsed."""


class UndefinedTruthError(DataProcessingError):
    """Relative error requested against a zero true frequency."""


class EmptyQuerySetError(DataProcessingError):
    """Aggregate metric requested over no queries."""


class InsufficientDataError(DataProcessingError):
    """Not enough distinct edges or population for the requested statistic or sample."""


class UnderestimateError(DataProcessingError):
    """An engine answered below the exact truth, which CountMin never does."""


class CounterOverflowError(PartiSketchError):
    """A 64-bit sketch counter would overflow."""


class PlanError(PartiSketchError):
    """Partition plan is invalid or cannot be materialized."""


class EngineStateError(PartiSketchError):
    """Operation not allowed in the engine's current phase."""


class StorageError(PartiSketchError):
    """File read/write or parse errors."""

    def __init__(
        self,
        message: str,
        path: str | None = None,
        operation: str | None = None,
        line_number: int | None = None,
        context: dict[str, Any] | None = None,
        cause: Exception | None = None,
    ):
        """Initialize storage error with file context.

        Args:
            message: Error message
            path: File being read or written
            operation: Operation being performed
            line_number: 1-based line number for text formats
            context: Additional context
            cause: Original exception
        """
        storage_context = {
            'path': path,
            'operation': operation,
            'line_number': line_number,
            **(context or {}),
        }
        super().__init__(message, storage_context, cause)


def handle_storage_errors(func: Callable) -> Callable:
    """Decorator to turn OS and text codec failures into StorageError.

    The wrapped function's first argument is taken as the path.

    Args:
        func: Function to wrap

    Returns:
        Wrapped function with consistent error handling
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except StorageError:
            raise
        except (OSError, UnicodeError) as e:
            path = str(args[0]) if args else None
            error = StorageError(
                f'{func.__name__} failed for {path}: {e}',
                path=path,
                operation=func.__name__,
                context={'error_type': type(e).__name__},
                cause=e,
            )
            logger.error(f'Storage error: {error.to_dict()}')
            raise error from e

    return wrapper


def handle_data_processing_errors(func: Callable) -> Callable:
    """Decorator to handle data processing errors consistently.

    Args:
        func: Function to wrap

    Returns:
        Wrapped function raising DataProcessingError for stray lookup/type errors
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PartiSketchError:
            raise
        except (KeyError, ValueError, TypeError, ZeroDivisionError) as e:
            error = DataProcessingError(
                f'Data processing error in {func.__name__}: {e}',
                data_type=type(args[0]).__name__ if args else 'unknown',
                processing_stage=func.__name__,
                context={'error_type': type(e).__name__, 'error_details': str(e)},
                cause=e,
            )
            logger.warning(f'Data processing error: {error.to_dict()}')
            raise error from e

    return wrapper


def validate_positive(value: int | float, name: str) -> None:
    """Validate that a value is positive.

    Raises:
        ConfigurationError: If value is not positive
    """
    if value is None or value <= 0:
        raise ConfigurationError(
            f'{name} must be positive, got {value}',
            config_key=name,
            expected_type='> 0',
            actual_value=value,
        )


def validate_open_unit_interval(value: float, name: str) -> None:
    """Validate that 0 < value < 1.

    Raises:
        ConfigurationError: If value is outside the open unit interval
    """
    if value is None or not 0 < value < 1:
        raise ConfigurationError(
            f'{name} must lie strictly between 0 and 1, got {value}',
            config_key=name,
            expected_type='(0, 1)',
            actual_value=value,
        )
