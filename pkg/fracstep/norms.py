"""Discrete norms on the space and space-time grids."""

import numpy as np

from .exceptions import ArgumentError


def l2_norm(y: np.ndarray, h: float) -> float:
    """
    ||y||_0 = sqrt(sum_i y_i^2 h) over the interior values passed in.

    Pass interior values only (i = 1..N-1); boundary entries are not stripped.
    """
    if not h > 0:
        raise ArgumentError(f"h must be positive, got {h}")
    y = np.asarray(y, dtype=float)
    return float(np.sqrt(np.sum(y * y) * h))


def max_norm(z: np.ndarray) -> float:
    """max |z| over every node and level of a space-time array."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise ArgumentError("max_norm of an empty history")
    return float(np.max(np.abs(z)))
