"""Tests for intermittent-sgd errors."""

from intermittent_sgd.errors import (
    ArtifactError,
    CalibrationError,
    ConfigurationError,
    DegenerateParametersError,
    EmptyTraceError,
    IntermittentSGDError,
    MissingParameterError,
    PreconditionError,
    TraceMismatchError,
    TuningError,
    WorkerIndexError,
)


def test_base_error() -> None:
    """Test IntermittentSGDError base class."""
    error = IntermittentSGDError("Test error")
    assert error.message == "Test error"
    assert str(error) == "Test error"
    assert isinstance(error, Exception)


def test_configuration_error() -> None:
    """Test ConfigurationError."""
    error = ConfigurationError("tau must be at least 1", field="tau", value=0)

    assert error.message == "tau must be at least 1"
    assert error.field == "tau"
    assert error.value == 0
    assert isinstance(error, IntermittentSGDError)


def test_configuration_error_minimal() -> None:
    """Test ConfigurationError with minimal arguments."""
    error = ConfigurationError("bad")
    assert error.field is None
    assert error.value is None


def test_worker_index_error() -> None:
    """Test WorkerIndexError is a configuration error carrying the index."""
    error = WorkerIndexError("out of range", index=7, num_workers=3)

    assert error.index == 7
    assert error.num_workers == 3
    assert error.field == "worker"
    assert error.value == 7
    assert isinstance(error, ConfigurationError)


def test_calibration_error() -> None:
    """Test CalibrationError."""
    error = CalibrationError(
        "Cannot reach zeta",
        quantity="zeta",
        target=0.03,
        best_value=0.05,
        best_parameter=0.0,
    )

    assert error.quantity == "zeta"
    assert error.target == 0.03
    assert error.best_value == 0.05
    assert error.best_parameter == 0.0
    assert isinstance(error, IntermittentSGDError)


def test_trace_mismatch_error() -> None:
    """Test TraceMismatchError."""
    error = TraceMismatchError("wrong algorithm", algorithm="mbsgd")
    assert error.algorithm == "mbsgd"


def test_missing_parameter_error() -> None:
    """Test MissingParameterError keeps the missing names as a list."""
    error = MissingParameterError("missing", kind="mbsgd", missing=("L", "sigma"))

    assert error.kind == "mbsgd"
    assert error.missing == ["L", "sigma"]


def test_artifact_error() -> None:
    """Test ArtifactError."""
    original = OSError("disk full")
    error = ArtifactError("Cannot write", path="out/trace.csv", original_error=original)

    assert error.message == "Cannot write"
    assert error.path == "out/trace.csv"
    assert error.original_error is original


def test_artifact_error_minimal() -> None:
    """Test ArtifactError with minimal arguments."""
    error = ArtifactError("Cannot read")
    assert error.path is None
    assert error.original_error is None


def test_error_inheritance() -> None:
    """Test error inheritance chain."""
    errors = [
        ConfigurationError("test"),
        WorkerIndexError("test", 1, 1),
        CalibrationError("test", "delta", 0.1, 0.2, 0.0),
        EmptyTraceError("test"),
        TraceMismatchError("test", "localsgd"),
        MissingParameterError("test", "mbsgd", []),
        DegenerateParametersError("test", "localsgd_faster"),
        PreconditionError("test", "smooth_contraction"),
        TuningError("test", "scaffold"),
        ArtifactError("test"),
    ]

    for error in errors:
        assert isinstance(error, IntermittentSGDError)
        assert isinstance(error, Exception)
