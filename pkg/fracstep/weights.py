"""
Weighting functions and the a, b, c coefficient families of the
lambda-weighted L2-1_sigma formula.

a_l and b_l depend on alpha only and are cached per alpha, extended lazily.
c_s mixes them with lambda sampled at (possibly fractional) grid points and
is rebuilt for every time level.
"""

import logging
import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy import integrate

from .config import DEFAULT_CONFIG
from .exceptions import ArgumentError, WeightValidationError
from .models import CoefficientTable, FractionalOrder, WeightFunction

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_SERIES_TERMS = 16
_SERIES_MIN_MIDPOINT = 2.0


# ---------------------------------------------------------------------------
# Weighting functions
# ---------------------------------------------------------------------------

def exp_weight(b: float) -> WeightFunction:
    """lambda(t) = exp(-b t), b >= 0; b = 0 gives the constant weight."""
    if not (b >= 0 and math.isfinite(b)):
        raise ArgumentError(f"decay rate b must be finite and >= 0, got {b}")
    if b == 0:
        return const_weight()

    def value(t):
        return np.exp(-b * np.asarray(t, dtype=float))

    def d1(t):
        return -b * np.exp(-b * np.asarray(t, dtype=float))

    def d2(t):
        return b * b * np.exp(-b * np.asarray(t, dtype=float))

    return WeightFunction(name="exp", value=value, d1=d1, d2=d2, params={"b": float(b)})


def const_weight() -> WeightFunction:
    """lambda(t) = 1, the classic Caputo kernel."""

    def value(t):
        return np.ones_like(np.asarray(t, dtype=float))

    def zero(t):
        return np.zeros_like(np.asarray(t, dtype=float))

    return WeightFunction(name="const", value=value, d1=zero, d2=zero, params={})


def make_weight(name: str, **params: float) -> WeightFunction:
    """Build a built-in weight by name ("exp" with b, or "const")."""
    if name == "exp":
        if "b" not in params:
            raise ArgumentError("weight 'exp' needs parameter b")
        return exp_weight(float(params["b"]))
    if name == "const":
        return const_weight()
    raise ArgumentError(f"unknown weight {name!r}; expected 'exp' or 'const'")


@dataclass(frozen=True)
class WeightReport:
    """Outcome of a sample-based check of lambda > 0, lambda' <= 0."""
    passed: bool
    min_value: float
    max_slope: float
    samples: int
    horizon: float
    message: str = ""

    def to_dict(self):
        return {
            "passed": self.passed,
            "min_value": self.min_value,
            "max_slope": self.max_slope,
            "samples": self.samples,
            "horizon": self.horizon,
            "message": self.message,
        }


def validate_weight(w: WeightFunction, horizon: float, samples: int) -> WeightReport:
    """
    Check the standing assumptions on lambda at equispaced samples of [0, T].

    Args:
        w: Weighting function
        horizon: T > 0
        samples: Number of sample points, at least 2

    Returns:
        WeightReport; passed iff min lambda > 0 and max lambda' <= 0
    """
    if not horizon > 0:
        raise ArgumentError(f"horizon must be positive, got {horizon}")
    if samples < 2:
        raise ArgumentError(f"need at least 2 samples, got {samples}")

    t = np.linspace(0.0, horizon, int(samples))
    return _check_samples(w, t, horizon)


def _check_samples(w: WeightFunction, t: np.ndarray, horizon: float) -> WeightReport:
    values = np.broadcast_to(np.asarray(w.value(t), dtype=float), t.shape)
    slopes = np.broadcast_to(np.asarray(w.d1(t), dtype=float), t.shape)
    min_value = float(values.min())
    max_slope = float(slopes.max())

    message = ""
    if not np.all(np.isfinite(values)) or min_value <= 0:
        bad = int(np.argmin(np.where(np.isfinite(values), values, -np.inf)))
        message = f"λ <= 0 at t={t[bad]:.6g}"
    elif max_slope > 0:
        bad = int(np.argmax(slopes))
        message = f"λ' > 0 at t={t[bad]:.6g}"

    return WeightReport(
        passed=not message,
        min_value=min_value,
        max_slope=max_slope,
        samples=int(t.size),
        horizon=float(horizon),
        message=message,
    )


# ---------------------------------------------------------------------------
# a_l and b_l
# ---------------------------------------------------------------------------

def _a_values(alpha: float, l: np.ndarray, tol: float) -> np.ndarray:
    """a_l for an integer array l >= 0."""
    sigma = 1.0 - alpha / 2.0
    p = 1.0 - alpha
    l = np.asarray(l, dtype=float)
    out = np.empty_like(l)

    first = l == 0
    out[first] = sigma ** p

    rest = ~first
    lo = l[rest] - 1.0 + sigma
    naive = (lo + 1.0) ** p - lo ** p
    stable = lo ** p * np.expm1(p * np.log1p(1.0 / lo))
    # rounding of the naive difference relative to its value
    estimate = _EPS * (lo + 1.0) ** p / np.maximum(np.abs(naive), np.finfo(float).tiny)
    out[rest] = np.where(estimate > tol, stable, naive)
    return out


def _b_values(alpha: float, l: np.ndarray, tol: float) -> np.ndarray:
    """b_l for an integer array l >= 1."""
    sigma = 1.0 - alpha / 2.0
    l = np.asarray(l, dtype=float)
    hi = l + sigma
    lo = l - 1.0 + sigma
    naive = ((hi ** (2.0 - alpha) - lo ** (2.0 - alpha)) / (2.0 - alpha)
             - 0.5 * (hi ** (1.0 - alpha) + lo ** (1.0 - alpha)))

    midpoint = l + sigma - 0.5
    leading = alpha * (1.0 - alpha) / 12.0 * midpoint ** (-alpha - 1.0)
    estimate = _EPS * hi ** (2.0 - alpha) / (2.0 - alpha) / leading
    use_series = (estimate > tol) & (midpoint >= _SERIES_MIN_MIDPOINT)
    if not np.any(use_series):
        return naive
    series = _b_series(alpha, midpoint[use_series])
    out = naive.copy()
    out[use_series] = series
    return out


def _b_series(alpha: float, x: np.ndarray) -> np.ndarray:
    """
    b_l as the defect of the trapezoid rule for y^{1-alpha} on [x-1/2, x+1/2]:
    b = -2 sum_{k even >= 2} g^(k)(x) h^(k+1) k/(k+1)!, g(y) = y^(1-alpha), h = 1/2.
    Every term is positive; the ratio of successive terms is below (h/x)^2.
    """
    p = 1.0 - alpha
    h = 0.5
    total = np.zeros_like(x)
    falling = p * (p - 1.0)  # p (p-1) ... (p-k+1) for k = 2
    for k in range(2, 2 * _SERIES_TERMS + 2, 2):
        term = -2.0 * falling * x ** (p - k) * h ** (k + 1) * k / math.factorial(k + 1)
        total += term
        falling *= (p - k) * (p - k - 1.0)
    return total


def _order_of(order) -> FractionalOrder:
    if isinstance(order, FractionalOrder):
        return order
    return FractionalOrder(float(order))


def _check_index(l, lowest: int) -> int:
    if isinstance(l, bool) or int(l) != l or l < lowest:
        raise ArgumentError(f"coefficient index must be an integer >= {lowest}, got {l!r}")
    return int(l)


def a_coeff(order, l: int, tol: Optional[float] = None) -> float:
    """
    a_0 = sigma^{1-alpha}; a_l = (l+sigma)^{1-alpha} - (l-1+sigma)^{1-alpha}, l >= 1.

    Args:
        order: FractionalOrder or alpha in (0, 1)
        l: Index >= 0
        tol: Cancellation tolerance for switching to the stable form
    """
    order = _order_of(order)
    l = _check_index(l, 0)
    tol = DEFAULT_CONFIG.coefficients.cancellation_tol if tol is None else tol
    return float(_a_values(order.alpha, np.array([l]), tol)[0])


def b_coeff(order, l: int, tol: Optional[float] = None) -> float:
    """
    b_l = [(l+sigma)^{2-alpha} - (l-1+sigma)^{2-alpha}]/(2-alpha)
          - [(l+sigma)^{1-alpha} + (l-1+sigma)^{1-alpha}]/2,  l >= 1.
    """
    order = _order_of(order)
    l = _check_index(l, 1)
    tol = DEFAULT_CONFIG.coefficients.cancellation_tol if tol is None else tol
    return float(_b_values(order.alpha, np.array([l]), tol)[0])


def a_coeff_integral(order, l: int) -> float:
    """a_l from (1-alpha) * int_0^1 (l+sigma-1+xi)^{-alpha} dxi (l >= 1)."""
    order = _order_of(order)
    l = _check_index(l, 1)
    alpha, sigma = order.alpha, order.sigma
    value, _ = integrate.quad(lambda xi: (l + sigma - 1.0 + xi) ** (-alpha), 0.0, 1.0,
                              epsabs=0.0, epsrel=1e-13)
    return (1.0 - alpha) * value


def b_coeff_integral(order, l: int) -> float:
    """
    b_l from alpha(1-alpha)/2^{2-alpha} int_0^1 eta int_{X-eta}^{X+eta} xi^{-alpha-1} dxi deta,
    X = 2(l+sigma) - 1, with the inner integral done in closed form.
    """
    order = _order_of(order)
    l = _check_index(l, 1)
    alpha, sigma = order.alpha, order.sigma
    X = 2.0 * (l + sigma) - 1.0

    def integrand(eta):
        return eta * ((X - eta) ** (-alpha) - (X + eta) ** (-alpha))

    value, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-13)
    return (1.0 - alpha) / 2.0 ** (2.0 - alpha) * value


class PowerCoefficients:
    """
    Lazily extended a_l (l >= 0) and b_l (l >= 1) for one alpha.

    Thread safe; the returned arrays are read-only snapshots.
    """

    def __init__(self, alpha: float, tol: float):
        self.alpha = alpha
        self.tol = tol
        self._lock = threading.Lock()
        self._a = np.empty(0)
        self._b = np.empty(0)

    def _extend(self, size: int) -> None:
        with self._lock:
            if self._a.size >= size:
                return
            new_size = max(size, 2 * self._a.size, 64)
            l = np.arange(new_size)
            a = _a_values(self.alpha, l, self.tol)
            b = np.zeros(new_size)
            b[1:] = _b_values(self.alpha, l[1:], self.tol)
            a.flags.writeable = False
            b.flags.writeable = False
            self._a, self._b = a, b
            logger.debug(f"Extended a/b cache for alpha={self.alpha} to {new_size} entries")

    def get(self, upto: int) -> Tuple[np.ndarray, np.ndarray]:
        """Return (a_0..a_upto, b_0..b_upto) with b_0 = 0 as placeholder."""
        if self._a.size < upto + 1:
            self._extend(upto + 1)
        a, b = self._a, self._b
        return a[:upto + 1], b[:upto + 1]


@lru_cache(maxsize=64)
def get_power_coefficients(alpha: float, tol: float) -> PowerCoefficients:
    return PowerCoefficients(alpha, tol)


def clear_coefficient_cache() -> None:
    get_power_coefficients.cache_clear()


# ---------------------------------------------------------------------------
# c_s
# ---------------------------------------------------------------------------

def c_coeffs(order, w: WeightFunction, tau: float, j: int, validate: bool = True,
             tol: Optional[float] = None) -> CoefficientTable:
    """
    Build the c_s weights of level j.

    c_0 = lambda_{sigma-1/2} a_0 for j = 0, and for j >= 1
      c_0 = lambda_{sigma-1/2} a_0 + lambda_sigma b_1,
      c_s = lambda_{s+sigma-1/2} a_s + lambda_{s+sigma} b_{s+1} - lambda_{s+sigma} b_s,
      c_j = lambda_{j+sigma-1/2} a_j - lambda_{j+sigma} b_j,
    with lambda_s = lambda(s*tau) taken from the continuous weight.

    Args:
        order: FractionalOrder or alpha
        w: Weighting function
        tau: Time step > 0
        j: Time level >= 0
        validate: Check lambda > 0, lambda' <= 0 at the sample points used
        tol: Cancellation tolerance for the a/b cache

    Raises:
        ArgumentError: tau <= 0 or j < 0
        WeightValidationError: lambda violates its constraints
    """
    order = _order_of(order)
    j = _check_index(j, 0)
    if not tau > 0:
        raise ArgumentError(f"tau must be positive, got {tau}")
    tol = DEFAULT_CONFIG.coefficients.cancellation_tol if tol is None else tol
    alpha, sigma = order.alpha, order.sigma

    a, b = get_power_coefficients(alpha, tol).get(j + 1)
    s = np.arange(j + 1)
    t_half = (s + sigma - 0.5) * tau
    t_sigma = (s + sigma) * tau

    if validate:
        samples = np.concatenate([t_half, t_sigma])
        report = _check_samples(w, samples, float(samples.max()))
        if not report.passed:
            raise WeightValidationError(f"weight {w.name} invalid: {report.message}")

    lam_half = np.broadcast_to(np.asarray(w.value(t_half), dtype=float), s.shape)

    if j == 0:
        c = lam_half * a[:1]
    else:
        lam_sigma = np.broadcast_to(np.asarray(w.value(t_sigma), dtype=float), s.shape)
        c = np.empty(j + 1)
        c[0] = lam_half[0] * a[0] + lam_sigma[0] * b[1]
        mid = slice(1, j)
        c[mid] = lam_half[mid] * a[mid] + lam_sigma[mid] * b[2:j + 1] - lam_sigma[mid] * b[1:j]
        c[j] = lam_half[j] * a[j] - lam_sigma[j] * b[j]

    c.flags.writeable = False
    return CoefficientTable(alpha=alpha, tau=float(tau), j=j, c=c, a=a[:j + 1], b=b[:j + 2])


def g_coeffs(table: CoefficientTable) -> np.ndarray:
    """g_s^{j+1} for s = 0..j (increasing in s)."""
    return table.g
