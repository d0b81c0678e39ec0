"""
The discrete lambda-weighted L2-1_sigma operator and its quadrature oracle.

apply_discrete evaluates the difference formula at t_{j+sigma};
reference_derivative evaluates the defining integral of the generalized
Caputo derivative by adaptive quadrature with the algebraic endpoint weight,
so the (t - eta)^{-alpha} singularity never reaches the integrand.
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from .config import DEFAULT_CONFIG
from .exceptions import ArgumentError, QuadratureError
from .models import CoefficientTable, FractionalOrder, TimeSeries, WeightFunction
from .weights import _order_of, c_coeffs

logger = logging.getLogger(__name__)

ScalarFunction = Callable[[float], float]


def apply_discrete(series: TimeSeries, order, w: WeightFunction, j: int,
                   table: Optional[CoefficientTable] = None) -> float:
    """
    tau^{1-alpha}/Gamma(2-alpha) * sum_{s=0}^{j} c_{j-s} v_{t,s}.

    Only entries 0..j+1 of the series are read.

    Args:
        series: Samples on the uniform grid
        order: FractionalOrder or alpha
        w: Weighting function
        j: Time level; the result approximates the derivative at t_{j+sigma}
        table: Precomputed coefficient table for (order, w, tau, j)

    Raises:
        ArgumentError: fewer than j+2 samples or a mismatched table
    """
    order = _order_of(order)
    if isinstance(j, bool) or int(j) != j or j < 0:
        raise ArgumentError(f"level j must be an integer >= 0, got {j!r}")
    j = int(j)
    if series.values.size < j + 2:
        raise ArgumentError(
            f"level {j} needs samples 0..{j + 1}, series has {series.values.size}")
    if table is None:
        table = c_coeffs(order, w, series.tau, j)
    elif table.j != j or not math.isclose(table.tau, series.tau) or table.alpha != order.alpha:
        raise ArgumentError("coefficient table does not match (alpha, tau, j)")

    increments = np.diff(series.values[:j + 2]) / series.tau
    scale = series.tau ** (1.0 - order.alpha) / order.gamma_2
    return float(scale * np.dot(table.c[::-1], increments))


def g_delta(values: np.ndarray, g: np.ndarray) -> float:
    """General g-form operator sum_{s=0}^{j} (v^{s+1} - v^s) g_s for len(g) = j+1."""
    values = np.asarray(values, dtype=float)
    if values.size != g.size + 1:
        raise ArgumentError(f"need {g.size + 1} samples for {g.size} g-coefficients")
    return float(np.dot(np.diff(values), g))


def sigma_admissible(g: np.ndarray, sigma: float) -> bool:
    """g_j/(2 g_j - g_{j-1}) <= sigma <= 1, with g_{-1} = 0."""
    g_last = g[-1]
    g_prev = g[-2] if g.size > 1 else 0.0
    return g_last / (2.0 * g_last - g_prev) <= sigma <= 1.0


def reference_derivative(dv: ScalarFunction, order, w: WeightFunction, t_eval: float,
                         tol: Optional[float] = None, limit: Optional[int] = None) -> float:
    """
    (1/Gamma(1-alpha)) int_0^t lambda(t-eta) (t-eta)^{-alpha} v'(eta) d eta.

    Args:
        dv: Derivative v' of the function being differentiated
        order: FractionalOrder or alpha
        w: Weighting function
        t_eval: Evaluation time > 0
        tol: Absolute tolerance on the result
        limit: Subinterval limit of the adaptive rule

    Raises:
        QuadratureError: achieved error estimate above tol
    """
    order = _order_of(order)
    if not t_eval > 0:
        raise ArgumentError(f"t_eval must be positive, got {t_eval}")
    tol = DEFAULT_CONFIG.oracle.tol if tol is None else tol
    limit = DEFAULT_CONFIG.oracle.quad_limit if limit is None else limit
    if limit < 2:
        raise ArgumentError(f"quadrature limit must be at least 2, got {limit}")

    def integrand(eta: float) -> float:
        return float(w.value(t_eval - eta)) * float(dv(eta))

    # weight 'alg' supplies (eta - 0)^0 (t - eta)^{-alpha}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(integrand, 0.0, t_eval, weight="alg",
                                           wvar=(0.0, -order.alpha), epsabs=tol * order.gamma_1,
                                           epsrel=0.0, limit=limit)
        except ValueError as e:
            raise QuadratureError(f"quadrature at t={t_eval:.6g} rejected its input: {e}",
                                  estimate=math.nan, achieved_error=math.inf) from e
    result = value / order.gamma_1
    achieved = abserr / order.gamma_1
    if not math.isfinite(result) or achieved > tol:
        raise QuadratureError(
            f"quadrature at t={t_eval:.6g} reached error {achieved:.3e} > tol {tol:.3e}",
            estimate=result, achieved_error=achieved)
    return result


# ---------------------------------------------------------------------------
# Smooth test functions
# ---------------------------------------------------------------------------

def _power(n: int) -> Tuple[ScalarFunction, ScalarFunction]:
    return (lambda t: t ** n), (lambda t: n * t ** (n - 1))


def _t3exp(b: float) -> Tuple[ScalarFunction, ScalarFunction]:
    """v = int_0^t eta^3 e^{-b eta} d eta, the time factor of the first test problem."""
    if not b > 0:
        raise ArgumentError("t3exp needs b > 0")

    def v(t):
        return 6.0 * special.gammainc(4.0, b * t) / b ** 4

    def dv(t):
        return t ** 3 * math.exp(-b * t)

    return v, dv


def smooth_function(name: str, **params: float) -> Tuple[ScalarFunction, ScalarFunction]:
    """Return (v, v') for a named smooth test function: t, t2, t3, t3exp."""
    if name == "t":
        return (lambda t: t), (lambda t: 1.0)
    if name == "t2":
        return _power(2)
    if name == "t3":
        return _power(3)
    if name == "t3exp":
        return _t3exp(float(params.get("b", 1.0)))
    raise ArgumentError(f"unknown test function {name!r}; expected t, t2, t3 or t3exp")


# ---------------------------------------------------------------------------
# Order study
# ---------------------------------------------------------------------------

@dataclass
class SlopeReport:
    """Max-over-j errors of the discrete operator and their fitted log2 slopes."""
    steps: List[int]
    errors: List[float]
    slopes: List[Optional[float]] = field(default_factory=list)
    exact: bool = False
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def finest_slope(self) -> Optional[float]:
        return self.slopes[-1] if self.slopes else None

    def to_dict(self):
        return {
            "steps": self.steps,
            "errors": self.errors,
            "slopes": self.slopes,
            "exact": self.exact,
            "metadata": self.metadata,
        }


def max_operator_error(v: ScalarFunction, dv: ScalarFunction, order, w: WeightFunction,
                       horizon: float, M: int, tol: Optional[float] = None) -> float:
    """max_j |apply_discrete - reference_derivative| at t_{j+sigma}, j = 0..M-1."""
    order = _order_of(order)
    tau = horizon / M
    series = TimeSeries(tau=tau, values=np.array([v(s * tau) for s in range(M + 1)]))
    worst = 0.0
    for j in range(M):
        table = c_coeffs(order, w, tau, j, validate=(j == M - 1))
        discrete = apply_discrete(series, order, w, j, table=table)
        exact = reference_derivative(dv, order, w, (j + order.sigma) * tau, tol=tol)
        worst = max(worst, abs(discrete - exact))
    return worst


def order_study(v: ScalarFunction, dv: ScalarFunction, order, w: WeightFunction,
                horizon: float, steps: Sequence[int], tol: Optional[float] = None,
                exact_threshold: Optional[float] = None, jobs: int = 1) -> SlopeReport:
    """
    Measure the convergence order of the discrete operator against the oracle.

    Args:
        v, dv: Smooth function and its derivative
        order: FractionalOrder or alpha
        w: Weighting function
        horizon: T
        steps: Increasing list of step counts M
        tol: Oracle tolerance
        exact_threshold: Errors below this everywhere mark the operator exact
        jobs: Worker threads across step counts

    Returns:
        SlopeReport with slopes log(e1/e2)/log(M2/M1) between successive M
    """
    order = _order_of(order)
    steps = [int(m) for m in steps]
    if not steps or any(m < 1 for m in steps):
        raise ArgumentError("steps must be a non-empty list of positive integers")
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise ArgumentError(f"steps must be strictly increasing, got {steps}")
    exact_threshold = (DEFAULT_CONFIG.oracle.exact_threshold
                       if exact_threshold is None else exact_threshold)

    def run(M: int) -> float:
        error = max_operator_error(v, dv, order, w, horizon, M, tol=tol)
        logger.info(f"Operator error alpha={order.alpha} M={M}: {error:.6e}")
        return error

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            errors = list(executor.map(run, steps))
    else:
        errors = [run(M) for M in steps]

    exact = all(e < exact_threshold for e in errors)
    slopes: List[Optional[float]] = []
    if not exact:
        for (m1, e1), (m2, e2) in zip(zip(steps, errors), zip(steps[1:], errors[1:])):
            if e1 > 0 and e2 > 0:
                slopes.append(math.log(e1 / e2) / math.log(m2 / m1))
            else:
                slopes.append(None)

    return SlopeReport(steps=steps, errors=errors, slopes=slopes, exact=exact,
                       metadata={"alpha": order.alpha, "weight": w.to_dict(),
                                 "horizon": horizon})
