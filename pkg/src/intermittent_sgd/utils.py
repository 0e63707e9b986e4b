"""Utility functions for intermittent-sgd."""

import math
import sys
import warnings
from enum import Enum
from typing import Any, Sequence

import numpy as np
from numpy.random import Generator, Philox

# Domain tags separating the independent counter-based streams.
ORACLE_STREAM = 1
SAMPLER_STREAM = 2
GENERATION_STREAM = 3
LEMMA_STREAM = 4

_UINT64_MASK = (1 << 64) - 1
_TWO_POW_53 = float(1 << 53)


def is_matplotlib_available() -> bool:
    """Check if the matplotlib library is available.

    Returns:
        True if matplotlib can be imported, False otherwise
    """
    try:
        import matplotlib  # noqa: F401

        return True
    except ImportError:
        return False


def validate_environment() -> None:
    """Validate the runtime environment and display warnings if necessary.

    This function checks:
    - Python version (should be >= 3.8)
    - Availability of the matplotlib library (needed for SVG plots only)

    Warnings will be displayed if any issues are detected.
    """
    version = sys.version_info
    if version < (3, 8):
        warnings.warn(
            f"Python {version.major}.{version.minor} is not officially supported. "
            f"Please upgrade to Python 3.8 or higher.",
            RuntimeWarning,
            stacklevel=2,
        )

    if not is_matplotlib_available():
        warnings.warn(
            "The 'matplotlib' library is not installed; plots cannot be rendered. "
            "Please install it with: pip install matplotlib",
            RuntimeWarning,
            stacklevel=2,
        )


def counter_stream(seed: int, tag: int, *counter: int) -> Philox:
    """Return a Philox bit generator keyed by ``(seed, tag)``.

    The counter words are ``(0, *counter)`` padded to four words, so the
    lowest word is free for the draws made from the stream. Streams with
    different counters never overlap within 2**64 draws.
    """
    if len(counter) > 3:
        raise ValueError("at most three counter words may be fixed")
    words = [0] + [int(c) & _UINT64_MASK for c in counter]
    words += [0] * (4 - len(words))
    key = np.array([int(seed) & _UINT64_MASK, int(tag) & _UINT64_MASK], dtype=np.uint64)
    return Philox(key=key, counter=np.array(words, dtype=np.uint64))


def counter_generator(seed: int, tag: int, *counter: int) -> Generator:
    """Return a numpy Generator over :func:`counter_stream`."""
    return Generator(counter_stream(seed, tag, *counter))


def box_muller_normals(bit_generator: Philox, size: int) -> np.ndarray:
    """Draw ``size`` standard normals from raw 64-bit words.

    Uses Box-Muller on 53-bit uniforms so the result depends only on the
    integer stream, not on numpy's Gaussian sampler.
    """
    pairs = (size + 1) // 2
    raw = np.asarray(bit_generator.random_raw(2 * pairs), dtype=np.uint64)
    uniforms = (raw >> np.uint64(11)).astype(np.float64) / _TWO_POW_53
    u1 = 1.0 - uniforms[0::2]
    u2 = uniforms[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * math.pi * u2
    normals = np.empty(2 * pairs, dtype=np.float64)
    normals[0::2] = radius * np.cos(angle)
    normals[1::2] = radius * np.sin(angle)
    return normals[:size]


def ordered_sum(rows: np.ndarray) -> np.ndarray:
    """Sum the rows of a 2-D array in ascending row order."""
    total = np.array(rows[0], dtype=np.float64)
    for row in rows[1:]:
        total += row
    return total


def ordered_mean(rows: np.ndarray) -> np.ndarray:
    """Average the rows of a 2-D array in ascending row order."""
    return ordered_sum(rows) / len(rows)


def format_float(value: float) -> str:
    """Format a float with 17 significant digits."""
    return format(float(value), ".17g")


def _json_key(key: Any) -> str:
    return str(key.value) if isinstance(key, Enum) else str(key)


def json_safe(value: Any) -> Any:
    """Convert numpy scalars, arrays and non-finite floats for JSON output.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
    """
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {_json_key(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [json_safe(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if math.isfinite(number):
            return number
        return "nan" if math.isnan(number) else ("inf" if number > 0 else "-inf")
    return value


def json_float(value: Any) -> float:
    """Inverse of :func:`json_safe` for one float; accepts the "inf" spellings."""
    return float(value)


def least_squares_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Slope of the least-squares line through ``(xs, ys)``."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    slope, _intercept = np.polyfit(x, y, 1)
    return float(slope)


# Export all utility functions
__all__ = [
    "ORACLE_STREAM",
    "SAMPLER_STREAM",
    "GENERATION_STREAM",
    "LEMMA_STREAM",
    "is_matplotlib_available",
    "validate_environment",
    "counter_stream",
    "counter_generator",
    "box_muller_normals",
    "ordered_sum",
    "ordered_mean",
    "format_float",
    "json_safe",
    "json_float",
    "least_squares_slope",
]
