"""Custom exception classes for intermittent-sgd."""

from typing import Any, Optional, Sequence


class IntermittentSGDError(Exception):
    """Base exception class for all intermittent-sgd errors."""

    def __init__(self, message: str) -> None:
        """Initialize the base error.

        Args:
            message: The error message
        """
        self.message = message
        super().__init__(message)


class ConfigurationError(IntermittentSGDError):
    """Exception raised when a configuration object holds invalid values.

    Attributes:
        message: The error message
        field: Name of the offending field (if known)
        value: The rejected value (if known)
    """

    def __init__(
        self,
        message: str,
        field: Optional[str] = None,
        value: Optional[Any] = None,
    ) -> None:
        """Initialize the configuration error.

        Args:
            message: The error message
            field: Name of the offending field
            value: The rejected value
        """
        super().__init__(message)
        self.field = field
        self.value = value


class WorkerIndexError(ConfigurationError):
    """Exception raised when a worker index falls outside ``[0, num_workers)``.

    Attributes:
        message: The error message
        index: The requested worker index
        num_workers: Number of workers in the problem instance
    """

    def __init__(self, message: str, index: int, num_workers: int) -> None:
        """Initialize the worker index error.

        Args:
            message: The error message
            index: The requested worker index
            num_workers: Number of workers in the problem instance
        """
        super().__init__(message, field="worker", value=index)
        self.index = index
        self.num_workers = num_workers


class CalibrationError(IntermittentSGDError):
    """Exception raised when problem generation cannot hit a conditioning target.

    Attributes:
        message: The error message
        quantity: Name of the calibrated quantity ("zeta", "delta" or "Delta")
        target: The requested value
        best_value: The closest value reached during bisection
        best_parameter: The generator knob that produced ``best_value``
    """

    def __init__(
        self,
        message: str,
        quantity: str,
        target: float,
        best_value: float,
        best_parameter: float,
    ) -> None:
        """Initialize the calibration error.

        Args:
            message: The error message
            quantity: Name of the calibrated quantity
            target: The requested value
            best_value: The closest value reached during bisection
            best_parameter: The generator knob that produced ``best_value``
        """
        super().__init__(message)
        self.quantity = quantity
        self.target = target
        self.best_value = best_value
        self.best_parameter = best_parameter


class EmptyTraceError(IntermittentSGDError):
    """Exception raised when a metric is requested on a trace with no records."""


class TraceMismatchError(IntermittentSGDError):
    """Exception raised when a metric is applied to a trace of the wrong algorithm.

    Attributes:
        message: The error message
        algorithm: The algorithm that produced the trace
    """

    def __init__(self, message: str, algorithm: str) -> None:
        """Initialize the trace mismatch error.

        Args:
            message: The error message
            algorithm: The algorithm that produced the trace
        """
        super().__init__(message)
        self.algorithm = algorithm


class MissingParameterError(IntermittentSGDError):
    """Exception raised when a rate formula needs parameters that were not supplied.

    Attributes:
        message: The error message
        kind: The rate kind being evaluated
        missing: Names of the missing parameters
    """

    def __init__(self, message: str, kind: str, missing: Sequence[str]) -> None:
        """Initialize the missing parameter error.

        Args:
            message: The error message
            kind: The rate kind being evaluated
            missing: Names of the missing parameters
        """
        super().__init__(message)
        self.kind = kind
        self.missing = list(missing)


class DegenerateParametersError(IntermittentSGDError):
    """Exception raised when a stepsize assignment has no finite positive term.

    Attributes:
        message: The error message
        kind: The rate kind being evaluated
    """

    def __init__(self, message: str, kind: str) -> None:
        """Initialize the degenerate parameters error.

        Args:
            message: The error message
            kind: The rate kind being evaluated
        """
        super().__init__(message)
        self.kind = kind


class PreconditionError(IntermittentSGDError):
    """Exception raised when an inequality check is called outside its premise.

    Attributes:
        message: The error message
        lemma: Name of the inequality being checked
    """

    def __init__(self, message: str, lemma: str) -> None:
        """Initialize the precondition error.

        Args:
            message: The error message
            lemma: Name of the inequality being checked
        """
        super().__init__(message)
        self.lemma = lemma


class TuningError(IntermittentSGDError):
    """Exception raised when every stepsize in the grid diverges for an algorithm.

    Attributes:
        message: The error message
        algorithm: The algorithm that could not be tuned
    """

    def __init__(self, message: str, algorithm: str) -> None:
        """Initialize the tuning error.

        Args:
            message: The error message
            algorithm: The algorithm that could not be tuned
        """
        super().__init__(message)
        self.algorithm = algorithm


class ArtifactError(IntermittentSGDError):
    """Exception raised when reading or writing an artifact fails.

    Attributes:
        message: The error message
        path: The artifact path involved (if any)
        original_error: The underlying exception that caused the failure
    """

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        original_error: Optional[Exception] = None,
    ) -> None:
        """Initialize the artifact error.

        Args:
            message: The error message
            path: The artifact path involved
            original_error: The underlying exception that caused the failure
        """
        super().__init__(message)
        self.path = path
        self.original_error = original_error


# Export all error classes
__all__ = [
    "IntermittentSGDError",
    "ConfigurationError",
    "WorkerIndexError",
    "CalibrationError",
    "EmptyTraceError",
    "TraceMismatchError",
    "MissingParameterError",
    "DegenerateParametersError",
    "PreconditionError",
    "TuningError",
    "ArtifactError",
]
