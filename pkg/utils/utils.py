"""Utility functions shared by the services and entry points.

This module provides logging setup, angle wrapping, stable float
formatting for result files and content digests for worlds.
"""

import hashlib
import logging
import math
from typing import Iterable

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

TWO_PI = 2.0 * math.pi


def configure_logging(level: str = "INFO") -> None:
    """Configures root logging once for an entry point.

    Args:
        level: Name of the logging level, e.g. ``"INFO"``.
    """
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, force=True)


def wrap_angle(theta: float) -> float:
    """Wraps an angle into ``[0, 2π)``."""
    wrapped = math.fmod(theta, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    # fmod of a tiny negative angle plus 2π rounds up to exactly 2π
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


def format_float(value: float) -> str:
    """Formats a float so that parsing it back gives the identical value.

    Infinite values are written as ``inf``; ``None`` callers should write
    an empty field instead.
    """
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def digest_bytes(payload: bytes) -> str:
    """Returns the hex SHA-256 digest of a byte string."""
    return hashlib.sha256(payload).hexdigest()


def derive_seed(seed: int, *parts: Iterable) -> int:
    """Derives a child seed deterministically from a parent seed and labels.

    Args:
        seed: The parent seed.
        parts: Labels (query index, generator name, ...) mixed into the seed.

    Returns:
        A 63-bit non-negative integer seed.
    """
    text = ":".join([str(seed), *[str(p) for p in parts]])
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little") >> 1
