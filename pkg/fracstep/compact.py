"""
Compact scheme, fourth order in space, for k = k(t) and q = q(t):

    Delta^{alpha,lambda} H_h y_i = a y_{xx,i}^{(sigma)} - d H_h y_i^{(sigma)} + H_h phi_i,

with H_h v_i = (v_{i-1} + 10 v_i + v_{i+1})/12, a = k(t_{j+sigma}), d = q(t_{j+sigma}).
Grid functions are full-length arrays over nodes 0..N; the homogeneous
Dirichlet data make one-sided stencils unnecessary.
"""

import logging

import numpy as np

from .exceptions import ArgumentError, NumericalError, ProblemValidationError
from .models import (
    CoefficientTable,
    ProblemKind,
    ProblemSpec,
    SchemeType,
    SolutionHistory,
    SpatialGrid,
    TridiagonalSystem,
)
from .norms import l2_norm
from .problems import sample, validate_problem
from .solver import check_step_count, require_valid_weight, history_sum, sample_initial
from .tridiagonal import thomas_solve
from .weights import c_coeffs

logger = logging.getLogger(__name__)


def apply_Hh(y: np.ndarray, h: float) -> np.ndarray:
    """
    (H_h y)_i = (y_{i-1} + 10 y_i + y_{i+1})/12 for i = 1..N-1.

    Args:
        y: Values at nodes 0..N; boundary entries are read as given
        h: Mesh width (only checked, the stencil is scale free)

    Returns:
        Interior vector of length N-1
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size < 3:
        raise ArgumentError(f"H_h needs N >= 2 (at least 3 nodes), got {y.size} values")
    if not h > 0:
        raise ArgumentError(f"h must be positive, got {h}")
    return (y[:-2] + 10.0 * y[1:-1] + y[2:]) / 12.0


def second_difference(y: np.ndarray, h: float) -> np.ndarray:
    """y_{xx,i} = (y_{i-1} - 2 y_i + y_{i+1})/h^2 at interior nodes."""
    return (y[:-2] - 2.0 * y[1:-1] + y[2:]) / h ** 2


def time_coefficients(problem: ProblemSpec, grid: SpatialGrid, t: float):
    """(a, d) = (k(t), q(t)) read off the node samples."""
    a = sample(problem.k, grid.nodes, t)
    d = sample(problem.q, grid.nodes, t)
    return float(a[0]), float(d[0])


def assemble_compact_step(problem: ProblemSpec, grid: SpatialGrid, history: SolutionHistory,
                          table: CoefficientTable, j: int) -> TridiagonalSystem:
    """Build the compact system for layer j+1 from layers 0..j."""
    if history.current != j:
        raise ArgumentError(f"history holds layers 0..{history.current}, assembling level {j}")
    sigma = table.sigma
    h = grid.h
    t = (j + sigma) * table.tau
    a, d = time_coefficients(problem, grid, t)

    g = table.g
    g_j = g[-1]
    n = grid.N - 1
    off = g_j / 12.0 - sigma * a / h ** 2 + sigma * d / 12.0
    main = 10.0 * g_j / 12.0 + 2.0 * sigma * a / h ** 2 + 10.0 * sigma * d / 12.0

    y_j = history.layer(j)
    hy_j = apply_Hh(y_j, h)
    phi = sample(problem.f, grid.nodes, t)
    rhs = (g_j * hy_j
           - apply_Hh(history_sum(history, g, j), h)
           + (1.0 - sigma) * (a * second_difference(y_j, h) - d * hy_j)
           + apply_Hh(phi, h))

    return TridiagonalSystem(lower=np.full(n, off), diag=np.full(n, main),
                             upper=np.full(n, off), rhs=rhs)


def solve_compact(problem: ProblemSpec, N: int, M: int, keep_tables: bool = False) -> SolutionHistory:
    """
    Run the compact scheme through level M.

    Raises:
        ProblemValidationError: problem whose k or q depends on x
    """
    if problem.kind != ProblemKind.TIME_ONLY:
        raise ProblemValidationError(
            f"compact scheme needs k = k(t) and q = q(t); problem {problem.name} is {problem.kind.value}")
    validate_problem(problem)
    grid = SpatialGrid(problem.length, N)
    M = check_step_count(M)
    tau = problem.horizon / M
    order = problem.order
    require_valid_weight(problem, M)

    history = SolutionHistory(grid, tau, M, sample_initial(problem, grid),
                              scheme=SchemeType.COMPACT)

    for j in range(M):
        t = (j + order.sigma) * tau
        table = c_coeffs(order, problem.weight, tau, j, validate=False)
        a, _ = time_coefficients(problem, grid, t)
        forcing = apply_Hh(sample(problem.f, grid.nodes, t), grid.h)
        history.diagnostics.record(l2_norm(forcing, grid.h), np.array([a]))

        system = assemble_compact_step(problem, grid, history, table, j)
        layer = thomas_solve(system)
        if not np.all(np.isfinite(layer)):
            raise NumericalError(f"non-finite values in layer {j + 1}")
        history.append(layer)
        if keep_tables:
            history.tables.append(table)

    logger.info(f"Compact run {problem.name}: N={N}, M={M}, alpha={problem.alpha}")
    return history
