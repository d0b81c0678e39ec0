"""
Second-order scheme for the variable-coefficient problem.

Each time level solves one tridiagonal system on the interior nodes:

    g_j (y^{j+1} - y^j) + sum_{s<j} g_s (y^{s+1} - y^s)
        = sigma Lambda y^{j+1} + (1 - sigma) Lambda y^j + phi,

with Lambda y_i = (a_{i+1}(y_{i+1} - y_i) - a_i(y_i - y_{i-1}))/h^2 - d_i y_i,
a_i = k(x_{i-1/2}, t_{j+sigma}), d_i = q(x_i, t_{j+sigma}), phi_i = f(x_i, t_{j+sigma}).
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import DEFAULT_CONFIG
from .exceptions import ArgumentError, NumericalError, WeightValidationError
from .models import (
    CoefficientTable,
    ProblemSpec,
    SchemeType,
    SolutionHistory,
    SpatialGrid,
    TridiagonalSystem,
)
from .norms import l2_norm
from .problems import sample, validate_problem
from .tridiagonal import thomas_solve
from .weights import c_coeffs, validate_weight

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepCoefficients:
    """Coefficients frozen at t_{j+sigma}."""
    t: float
    a: np.ndarray    # k at x_{i-1/2}, i = 1..N
    d: np.ndarray    # q at interior nodes
    phi: np.ndarray  # f at interior nodes


def step_coefficients(problem: ProblemSpec, grid: SpatialGrid, t: float) -> StepCoefficients:
    nodes = grid.nodes
    return StepCoefficients(
        t=t,
        a=sample(problem.k, grid.half_nodes, t),
        d=sample(problem.q, nodes[1:-1], t),
        phi=sample(problem.f, nodes[1:-1], t),
    )


def apply_lambda(y: np.ndarray, a: np.ndarray, d: np.ndarray, h: float) -> np.ndarray:
    """Lambda y at interior nodes for a full-length grid function y."""
    flux = a * np.diff(y) / h
    return np.diff(flux) / h - d * y[1:-1]


def history_sum(history: SolutionHistory, g: np.ndarray, j: int) -> np.ndarray:
    """sum_{s=0}^{j-1} g_s (y^{s+1} - y^s) over all nodes."""
    if j == 0:
        return np.zeros(history.grid.N + 1)
    return g[:j] @ history.increments[:j]


def assemble_step(problem: ProblemSpec, grid: SpatialGrid, history: SolutionHistory,
                  table: CoefficientTable, j: int,
                  coefficients: Optional[StepCoefficients] = None) -> TridiagonalSystem:
    """
    Build the system for layer j+1.

    Args:
        problem: Problem being solved
        grid: Spatial grid of the history
        history: Layers 0..j
        table: Coefficient table of level j
        j: Current level
        coefficients: Precomputed k, q, f samples at t_{j+sigma}

    Returns:
        TridiagonalSystem in the interior unknowns y_1^{j+1}..y_{N-1}^{j+1}
    """
    if history.current != j:
        raise ArgumentError(f"history holds layers 0..{history.current}, assembling level {j}")
    if table.j != j:
        raise ArgumentError(f"coefficient table is for level {table.j}, not {j}")

    sigma = table.sigma
    h = grid.h
    if coefficients is None:
        coefficients = step_coefficients(problem, grid, (j + sigma) * table.tau)
    a, d = coefficients.a, coefficients.d

    g = table.g
    g_j = g[-1]
    a_left, a_right = a[:-1], a[1:]

    lower = -sigma * a_left / h ** 2
    upper = -sigma * a_right / h ** 2
    diag = g_j + sigma * (a_left + a_right) / h ** 2 + sigma * d

    y_j = history.layer(j)
    rhs = (g_j * y_j[1:-1]
           - history_sum(history, g, j)[1:-1]
           + (1.0 - sigma) * apply_lambda(y_j, a, d, h)
           + coefficients.phi)

    return TridiagonalSystem(lower=lower, diag=diag, upper=upper, rhs=rhs)


def solve(problem: ProblemSpec, N: int, M: int, keep_tables: bool = False) -> SolutionHistory:
    """
    Run the second-order scheme through level M.

    Args:
        problem: Validated problem
        N: Spatial subintervals (>= 2)
        M: Time steps (>= 1)
        keep_tables: Keep every CoefficientTable on history.tables

    Returns:
        Complete SolutionHistory with per-step diagnostics
    """
    validate_problem(problem)
    grid = SpatialGrid(problem.length, N)
    M = check_step_count(M)
    tau = problem.horizon / M
    order = problem.order
    require_valid_weight(problem, M)

    history = SolutionHistory(grid, tau, M, sample_initial(problem, grid),
                              scheme=SchemeType.SECOND_ORDER)

    for j in range(M):
        table = c_coeffs(order, problem.weight, tau, j, validate=False)
        coefficients = step_coefficients(problem, grid, (j + order.sigma) * tau)
        history.diagnostics.record(l2_norm(coefficients.phi, grid.h), coefficients.a)
        system = assemble_step(problem, grid, history, table, j, coefficients=coefficients)
        layer = thomas_solve(system)
        if not np.all(np.isfinite(layer)):
            raise NumericalError(f"non-finite values in layer {j + 1}")
        history.append(layer)
        if keep_tables:
            history.tables.append(table)
        logger.debug(f"Level {j + 1}/{M}: g_j={table.g[-1]:.6e}, max|y|={np.max(np.abs(layer)):.6e}")

    logger.info(f"Second-order run {problem.name}: N={N}, M={M}, alpha={problem.alpha}")
    return history


def sample_initial(problem: ProblemSpec, grid: SpatialGrid) -> np.ndarray:
    nodes = grid.nodes
    values = np.broadcast_to(np.asarray(problem.u0(nodes), dtype=float), nodes.shape)
    return values.copy()


def check_step_count(M) -> int:
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise ArgumentError(f"M must be a positive integer, got {M!r}")
    return int(M)


def require_valid_weight(problem: ProblemSpec, M: int) -> None:
    samples = max(2, DEFAULT_CONFIG.coefficients.weight_samples_per_step * M)
    report = validate_weight(problem.weight, problem.horizon, samples)
    if not report.passed:
        logger.warning(f"Weight {problem.weight.name} rejected: {report.message}")
        raise WeightValidationError(f"weight {problem.weight.name} invalid: {report.message}")


def coercivity_ratio(a: np.ndarray, d: np.ndarray, h: float, length: float,
                     y: np.ndarray) -> float:
    """
    (-Lambda y, y) / (4 c_1 ||y||_0^2 / l^2) for a zero-boundary grid function y.

    Values >= 1 confirm the positive-definiteness bound used by the a priori estimate.
    """
    y = np.asarray(y, dtype=float)
    interior = y[1:-1]
    energy = -np.sum(apply_lambda(y, a, d, h) * interior) * h
    c_1 = float(np.min(a))
    reference = 4.0 * c_1 * l2_norm(interior, h) ** 2 / length ** 2
    if reference == 0.0:
        return float("inf")
    return float(energy / reference)
