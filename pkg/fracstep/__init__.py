"""
fracstep: finite-difference solvers for time-fractional diffusion with a
weighted Caputo derivative.

The time derivative is discretized by the lambda-weighted L2-1_sigma formula
at the offset point t_{j+sigma}, sigma = 1 - alpha/2. Two space
discretizations are provided: a second-order scheme for coefficients k(x, t),
q(x, t) and a fourth-order compact scheme for k(t), q(t).
"""

__version__ = "0.1.0"

from .analysis import (
    PRESETS,
    Coupling,
    StabilityReport,
    convergence_order,
    error_norms,
    render_reports,
    run_preset,
    run_study,
    stability_audit,
)
from .compact import apply_Hh, solve_compact
from .config import DEFAULT_CONFIG, FracstepConfig, get_config
from .exceptions import (
    ArgumentError,
    ConfigError,
    FracstepError,
    NumericalError,
    ProblemValidationError,
    QuadratureError,
    StudyError,
    WeightValidationError,
)
from .models import (
    CoefficientTable,
    ConvergenceReport,
    CouplingKind,
    FractionalOrder,
    LevelResult,
    ProblemKind,
    ProblemSpec,
    SchemeType,
    SolutionHistory,
    SpatialGrid,
    TimeSeries,
    TridiagonalSystem,
    WeightFunction,
)
from .norms import l2_norm, max_norm
from .operator import apply_discrete, order_study, reference_derivative, smooth_function
from .problems import load_problem, make_test1, make_test2, validate_problem
from .solver import solve
from .tridiagonal import thomas_solve
from .verification import run_verification
from .weights import a_coeff, b_coeff, c_coeffs, const_weight, exp_weight, g_coeffs, make_weight

__all__ = [
    "__version__",
    "PRESETS",
    "ArgumentError",
    "CoefficientTable",
    "ConfigError",
    "ConvergenceReport",
    "Coupling",
    "CouplingKind",
    "DEFAULT_CONFIG",
    "FracstepConfig",
    "FracstepError",
    "FractionalOrder",
    "LevelResult",
    "NumericalError",
    "ProblemKind",
    "ProblemSpec",
    "ProblemValidationError",
    "QuadratureError",
    "SchemeType",
    "SolutionHistory",
    "SpatialGrid",
    "StabilityReport",
    "StudyError",
    "TimeSeries",
    "TridiagonalSystem",
    "WeightFunction",
    "WeightValidationError",
    "a_coeff",
    "apply_Hh",
    "apply_discrete",
    "b_coeff",
    "c_coeffs",
    "const_weight",
    "convergence_order",
    "error_norms",
    "exp_weight",
    "g_coeffs",
    "get_config",
    "l2_norm",
    "load_problem",
    "make_test1",
    "make_test2",
    "make_weight",
    "max_norm",
    "order_study",
    "reference_derivative",
    "render_reports",
    "run_preset",
    "run_study",
    "run_verification",
    "smooth_function",
    "solve",
    "solve_compact",
    "stability_audit",
    "thomas_solve",
    "validate_problem",
]
