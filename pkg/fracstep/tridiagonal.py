"""
Tridiagonal solves for the implicit time steps.

The matrix for interior unknowns 1..N-1 is
    [d0  u0                    ] [y1]     [r0]
    [l1  d1  u1                ] [y2]     [r1]
    [        . . .             ]  .    =   .
    [             l_{n-1} d_{n-1}] [y_{N-1}] [r_{n-1}]
with lower[0] and upper[-1] unused.
"""

import logging
import math

import numpy as np

from .exceptions import NumericalError
from .models import TridiagonalSystem

logger = logging.getLogger(__name__)


def thomas_solve(system: TridiagonalSystem) -> np.ndarray:
    """
    Solve a tridiagonal system with the Thomas algorithm.

    Args:
        system: Assembled system

    Returns:
        Solution vector of length system.size

    Raises:
        NumericalError: zero or non-finite pivot
    """
    lower = system.lower.tolist()
    diag = system.diag.tolist()
    upper = system.upper.tolist()
    rhs = system.rhs.tolist()
    n = len(diag)

    c_prime = [0.0] * n
    d_prime = [0.0] * n

    pivot = diag[0]
    _check_pivot(pivot, 0)
    c_prime[0] = upper[0] / pivot
    d_prime[0] = rhs[0] / pivot
    for i in range(1, n):
        pivot = diag[i] - lower[i] * c_prime[i - 1]
        _check_pivot(pivot, i)
        c_prime[i] = upper[i] / pivot if i < n - 1 else 0.0
        d_prime[i] = (rhs[i] - lower[i] * d_prime[i - 1]) / pivot

    x = [0.0] * n
    x[-1] = d_prime[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d_prime[i] - c_prime[i] * x[i + 1]

    return np.array(x)


def _check_pivot(pivot: float, row: int) -> None:
    if pivot == 0.0 or not math.isfinite(pivot):
        raise NumericalError(f"Thomas elimination hit pivot {pivot!r} at row {row}")


def dense_solve(system: TridiagonalSystem) -> np.ndarray:
    """Dense LU solve of the same system, used to cross-check thomas_solve."""
    return np.linalg.solve(system.to_dense(), system.rhs)


def relative_residual(system: TridiagonalSystem, x: np.ndarray) -> float:
    """||Ax - r||_inf / (||A||_inf ||x||_inf)."""
    residual = np.max(np.abs(system.matvec(x) - system.rhs))
    lower = np.abs(system.lower).copy()
    upper = np.abs(system.upper).copy()
    lower[0] = 0.0
    upper[-1] = 0.0
    matrix_norm = np.max(np.abs(system.diag) + lower + upper)
    scale = matrix_norm * np.max(np.abs(x))
    if scale == 0.0:
        return float(residual)
    return float(residual / scale)
