"""
Data models for fracstep.

This module defines the core data structures shared by the coefficient
engine, the discrete operator, both solvers and the analysis layer: weights,
fractional orders, coefficient tables, grids, solution histories, problem
definitions and convergence reports.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional

import numpy as np

from .exceptions import ArgumentError

GridFunction = Callable[[np.ndarray, float], np.ndarray]


class SchemeType(str, Enum):
    """Difference scheme families."""
    SECOND_ORDER = "second-order"
    COMPACT = "compact"


class ProblemKind(str, Enum):
    """Coefficient structure of a problem."""
    GENERAL = "general"
    TIME_ONLY = "time-only-coefficients"


class CouplingKind(str, Enum):
    """How the spatial and temporal steps move together in a study."""
    FIX_H = "fix-h-refine-tau"
    FIX_TAU = "fix-tau-refine-h"
    TAU_LINEAR = "couple-tau-h"        # tau = c*h
    TAU_QUADRATIC = "couple-tau-h2"    # tau = c*h^2


@dataclass(frozen=True)
class FractionalOrder:
    """Order alpha of the derivative together with the offset sigma = 1 - alpha/2."""
    alpha: float

    def __post_init__(self):
        if not (isinstance(self.alpha, (int, float)) and 0.0 < self.alpha < 1.0):
            raise ArgumentError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    @property
    def sigma(self) -> float:
        return 1.0 - self.alpha / 2.0

    @property
    def gamma_1(self) -> float:
        """Gamma(1 - alpha)."""
        return math.gamma(1.0 - self.alpha)

    @property
    def gamma_2(self) -> float:
        """Gamma(2 - alpha)."""
        return math.gamma(2.0 - self.alpha)


@dataclass(frozen=True)
class WeightFunction:
    """
    Weighting function lambda(t) of the generalized Caputo kernel.

    Attributes:
        name: Built-in name ("exp", "const") or a user label
        value: t -> lambda(t), vectorized over numpy arrays
        d1: t -> lambda'(t)
        d2: t -> lambda''(t)
        params: Named real parameters (e.g. {"b": 1.0} for exp(-b t))
    """
    name: str
    value: Callable[[Any], Any]
    d1: Callable[[Any], Any]
    d2: Callable[[Any], Any]
    params: Mapping[str, float] = field(default_factory=dict)

    def __call__(self, t):
        return self.value(t)

    @property
    def is_constant(self) -> bool:
        return self.name == "const"

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "params": dict(self.params)}


@dataclass(frozen=True)
class CoefficientTable:
    """
    The c_s weights of one time level j.

    c[s] multiplies the difference quotient lagging s steps behind the
    newest one. a and b are read-only views into the shared per-alpha cache
    (b[0] is a placeholder, the b family starts at l = 1).
    """
    alpha: float
    tau: float
    j: int
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def sigma(self) -> float:
        return 1.0 - self.alpha / 2.0

    @property
    def g(self) -> np.ndarray:
        """g_s^{j+1} = tau^{-alpha}/Gamma(2-alpha) * c_{j-s}, s = 0..j."""
        scale = self.tau ** (-self.alpha) / math.gamma(2.0 - self.alpha)
        return scale * self.c[::-1]


@dataclass(frozen=True)
class TimeSeries:
    """Samples v^0..v^n of a function on the uniform grid t_s = s*tau."""
    tau: float
    values: np.ndarray

    def __post_init__(self):
        if not self.tau > 0:
            raise ArgumentError(f"tau must be positive, got {self.tau}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ArgumentError("a time series needs at least two samples")
        object.__setattr__(self, "values", values)

    @property
    def increments(self) -> np.ndarray:
        """Difference quotients v_{t,s} = (v^{s+1} - v^s)/tau."""
        return np.diff(self.values) / self.tau


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid x_i = i*h, i = 0..N, on [0, length]."""
    length: float
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ArgumentError(f"N must be an integer >= 2, got {self.N}")
        if not self.length > 0:
            raise ArgumentError(f"domain length must be positive, got {self.length}")

    @property
    def h(self) -> float:
        return self.length / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.N + 1)

    @property
    def half_nodes(self) -> np.ndarray:
        """x_{i-1/2} for i = 1..N."""
        return (np.arange(1, self.N + 1) - 0.5) * self.h


@dataclass
class StepDiagnostics:
    """Quantities recorded while stepping, consumed by the stability audit."""
    forcing_norms: List[float] = field(default_factory=list)
    coefficient_min: float = math.inf
    coefficient_max: float = -math.inf

    def record(self, forcing_norm: float, coefficients: np.ndarray) -> None:
        self.forcing_norms.append(float(forcing_norm))
        self.coefficient_min = min(self.coefficient_min, float(np.min(coefficients)))
        self.coefficient_max = max(self.coefficient_max, float(np.max(coefficients)))


class SolutionHistory:
    """
    All computed layers y^0..y^j of one run.

    Layers and their increments y^{s+1} - y^s are preallocated for M steps;
    the increments feed the nonlocal operator without re-differencing.
    """

    def __init__(self, grid: SpatialGrid, tau: float, M: int, initial: np.ndarray,
                 scheme: SchemeType = SchemeType.SECOND_ORDER):
        if int(M) != M or M < 1:
            raise ArgumentError(f"M must be a positive integer, got {M}")
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (grid.N + 1,):
            raise ArgumentError(f"initial layer must have {grid.N + 1} entries")
        self.grid = grid
        self.tau = tau
        self.M = M
        self.scheme = scheme
        self._layers = np.zeros((M + 1, grid.N + 1))
        self._increments = np.zeros((M, grid.N + 1))
        self._layers[0] = initial
        self._layers[0, 0] = self._layers[0, -1] = 0.0
        self._count = 1
        self.diagnostics = StepDiagnostics()
        self.tables: List[CoefficientTable] = []

    @property
    def current(self) -> int:
        """Index of the newest stored layer."""
        return self._count - 1

    @property
    def complete(self) -> bool:
        return self._count == self.M + 1

    @property
    def layers(self) -> np.ndarray:
        view = self._layers[:self._count]
        view.flags.writeable = False
        return view

    @property
    def increments(self) -> np.ndarray:
        view = self._increments[:self._count - 1]
        view.flags.writeable = False
        return view

    @property
    def times(self) -> np.ndarray:
        return np.arange(self._count) * self.tau

    def layer(self, j: int) -> np.ndarray:
        if not 0 <= j < self._count:
            raise ArgumentError(f"layer {j} not computed (have 0..{self.current})")
        view = self._layers[j]
        view.flags.writeable = False
        return view

    def append(self, interior: np.ndarray) -> None:
        """Store a new layer given its interior values; boundaries stay zero."""
        if self._count > self.M:
            raise ArgumentError("history already holds all M+1 layers")
        j = self._count
        self._layers[j, 1:-1] = interior
        self._increments[j - 1] = self._layers[j] - self._layers[j - 1]
        self._count += 1


@dataclass(frozen=True)
class TridiagonalSystem:
    """
    Tridiagonal system on the interior nodes.

    lower[i] couples row i to unknown i-1 (lower[0] is ignored), upper[i]
    couples row i to unknown i+1 (upper[-1] is ignored).
    """
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if not (len(self.lower) == len(self.upper) == len(self.rhs) == n) or n == 0:
            raise ArgumentError("tridiagonal arrays must share one non-zero length")

    @property
    def size(self) -> int:
        return len(self.diag)

    def dominance_margin(self) -> np.ndarray:
        """|diag| - |lower| - |upper| row by row, ignoring the unused corners."""
        lower = np.abs(self.lower).copy()
        upper = np.abs(self.upper).copy()
        lower[0] = 0.0
        upper[-1] = 0.0
        return np.abs(self.diag) - lower - upper

    def to_dense(self) -> np.ndarray:
        n = self.size
        matrix = np.diag(self.diag.astype(float))
        if n > 1:
            matrix += np.diag(self.lower[1:], -1) + np.diag(self.upper[:-1], 1)
        return matrix

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[1:] += self.lower[1:] * x[:-1]
        y[:-1] += self.upper[:-1] * x[1:]
        return y


@dataclass(frozen=True)
class ProblemSpec:
    """
    A 1-D generalized time-fractional diffusion problem with Dirichlet data.

    Coefficient callables take (x: ndarray, t: float) and return arrays
    shaped like x; u0 takes x only.
    """
    name: str
    alpha: float
    weight: WeightFunction
    k: GridFunction
    q: GridFunction
    f: GridFunction
    u0: Callable[[np.ndarray], np.ndarray]
    length: float = 1.0
    horizon: float = 1.0
    exact: Optional[GridFunction] = None
    kind: ProblemKind = ProblemKind.GENERAL
    params: Mapping[str, Any] = field(default_factory=dict)
    symbolic: Optional[Mapping[str, Any]] = field(default=None, compare=False, repr=False)

    @property
    def order(self) -> FractionalOrder:
        return FractionalOrder(self.alpha)

    @property
    def has_exact(self) -> bool:
        return self.exact is not None

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "alpha": self.alpha,
            "weight": self.weight.to_dict(),
            "length": self.length,
            "horizon": self.horizon,
            "kind": self.kind.value,
            "has_exact": self.has_exact,
            "params": dict(self.params),
        }


@dataclass
class LevelResult:
    """Errors of one refinement level."""
    N: int
    M: int
    h: float
    tau: float
    err_l2: Optional[float] = None
    err_max: Optional[float] = None
    co_l2: Optional[float] = None
    co_max: Optional[float] = None
    stability_ratio: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N, "M": self.M, "h": self.h, "tau": self.tau,
            "err_l2": self.err_l2, "co_l2": self.co_l2,
            "err_max": self.err_max, "co_max": self.co_max,
            "stability_ratio": self.stability_ratio,
        }


@dataclass
class ConvergenceReport:
    """
    Per-level errors and convergence orders of one refinement study.

    Attributes:
        scheme: Scheme that produced the runs
        problem: Problem description (name, b, alpha, ...)
        coupling: Human-readable (h, tau) rule
        drive: Which step the CO is measured against ("tau" or "h")
        levels: Level results in refinement order
        metadata: Recorded interpretations and notes
        reference: Optional published values of err_l2 per level
    """
    scheme: SchemeType
    problem: Dict[str, Any]
    coupling: str
    drive: str
    levels: List[LevelResult] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    reference: Optional[List[Optional[float]]] = None

    @property
    def complete(self) -> bool:
        return all(level.err_l2 is not None for level in self.levels)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme.value,
            "problem": self.problem,
            "coupling": self.coupling,
            "drive": self.drive,
            "levels": [level.to_dict() for level in self.levels],
            "metadata": self.metadata,
            "reference": self.reference,
        }
