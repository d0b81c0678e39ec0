"""
Property suites for the coefficient families, the g-form stability
conditions and the discrete energy inequalities.

Every inequality is evaluated on concrete numbers; a suite counts the
checked instances and keeps the first few violations as witnesses.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .compact import apply_Hh
from .config import DEFAULT_CONFIG, PropertyConfig
from .models import FractionalOrder, TimeSeries
from .norms import l2_norm
from .operator import apply_discrete, g_delta, sigma_admissible
from .solver import coercivity_ratio
from .weights import (
    a_coeff_integral,
    b_coeff_integral,
    c_coeffs,
    exp_weight,
    get_power_coefficients,
)

logger = logging.getLogger(__name__)

_SLACK = 1e-12
_INTEGRAL_RTOL = 1e-8
_TELESCOPING_RTOL = 1e-12

SUITE_DESCRIPTIONS = {
    "a_bounds": "(1-a)/(l+s)^a < a_l < (1-a)/(l+s-1)^a",
    "a_difference_bounds": "a(1-a)/(l+s+1)^(a+1) < a_l - a_(l+1) < a(1-a)/(l+s-1)^(a+1)",
    "b_bounds": "a(1-a)/(12(l+s)^(a+1)) < b_l < a(1-a)/(12(l+s-1)^(a+1))",
    "a_minus_b": "a_l - b_l > (1-a)/2 (l+s)^-a",
    "first_pair_combination": "(2s-1)(a_0+b_1) - s(a_1+b_2-b_1) > a(1-a)/(4s(1+s)^a)",
    "integral_forms": "closed forms agree with the integral representations",
    "c_positive": "c_s > 0",
    "c_monotone": "c_0 > c_1 > ... > c_j",
    "c_last_lower_bound": "c_j > (1-a)/2 lam(t_(j+s))/(j+s)^a",
    "c_first_pair": "(2s-1)c_0 - s c_1 > 0",
    "const_weight_sum": "sum c_s = (j+s)^(1-a) for lam = 1",
    "g_monotone_floor": "g increasing in s, g_0 > lam(t)/(2 G(1-a) t^a) at t = t_(j+s)",
    "sigma_admissible": "g_j/(2g_j - g_(j-1)) <= s <= 1",
    "energy_inequality": "(s v^(j+1) + (1-s) v^j) D v >= D(v^2)/2",
    "g_form_upper": "v^(j+1) D v >= D(v^2)/2 + (D v)^2/(2 g_j)",
    "g_form_lower": "v^j D v >= D(v^2)/2 - (D v)^2/(2 (g_j - g_(j-1)))",
    "coercivity": "(-Lambda y, y) >= 4 c1 ||y||^2",
    "norm_equivalence": "5/12 ||y||^2 <= ||H y||^2 <= ||y||^2",
}


@dataclass
class SuiteResult:
    """Pass/fail counts of one inequality."""
    name: str
    description: str
    checked: int = 0
    violations: int = 0
    witnesses: List[Dict[str, Any]] = field(default_factory=list)
    max_witnesses: int = 5

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, holds, witness: Callable[[int], Dict[str, Any]]) -> None:
        """Count a boolean array of instances; witness(i) describes instance i."""
        holds = np.atleast_1d(np.asarray(holds, dtype=bool))
        self.checked += int(holds.size)
        bad = np.flatnonzero(~holds)
        self.violations += int(bad.size)
        room = self.max_witnesses - len(self.witnesses)
        for index in bad[:max(0, room)]:
            self.witnesses.append(witness(int(index)))

    def merge(self, other: "SuiteResult") -> None:
        self.checked += other.checked
        self.violations += other.violations
        room = self.max_witnesses - len(self.witnesses)
        self.witnesses.extend(other.witnesses[:max(0, room)])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "description": self.description,
            "checked": self.checked,
            "violations": self.violations,
            "passed": self.passed,
            "witnesses": self.witnesses,
        }


@dataclass
class VerificationReport:
    suites: Dict[str, SuiteResult]
    settings: Dict[str, Any]

    @property
    def passed(self) -> bool:
        return all(suite.passed for suite in self.suites.values())

    @property
    def failures(self) -> List[str]:
        return [name for name, suite in self.suites.items() if not suite.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "settings": self.settings,
            "suites": {name: suite.to_dict() for name, suite in sorted(self.suites.items())},
        }


class _Suites:
    """Lazily created suites sharing one witness limit."""

    def __init__(self, max_witnesses: int):
        self.max_witnesses = max_witnesses
        self.results: Dict[str, SuiteResult] = {}

    def __getitem__(self, name: str) -> SuiteResult:
        if name not in self.results:
            self.results[name] = SuiteResult(name, SUITE_DESCRIPTIONS[name],
                                              max_witnesses=self.max_witnesses)
        return self.results[name]


def _below(lhs, rhs, scale=None) -> np.ndarray:
    """lhs <= rhs up to a slack of one part in 1e12 of scale (default: the larger side)."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if scale is None:
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
    return lhs <= rhs + _SLACK * scale


def _strictly_below(lhs, rhs) -> np.ndarray:
    return np.asarray(lhs, dtype=float) < np.asarray(rhs, dtype=float)


# ---------------------------------------------------------------------------
# Coefficient suites
# ---------------------------------------------------------------------------

def check_power_coefficients(alpha: float, max_level: int, suites: _Suites, tol: float) -> None:
    """Bounds on a_l, b_l and their combinations for l = 1..max_level."""
    order = FractionalOrder(alpha)
    sigma = order.sigma
    a, b = get_power_coefficients(alpha, tol).get(max_level + 2)
    l = np.arange(1, max_level + 1, dtype=float)
    a_l, a_next, b_l = a[1:max_level + 1], a[2:max_level + 2], b[1:max_level + 1]
    k = alpha * (1.0 - alpha)

    def witness(suite, **extra):
        return lambda i: {"suite": suite, "alpha": alpha, "l": int(l[i]),
                          **{key: float(value[i]) for key, value in extra.items()}}

    lower = (1.0 - alpha) / (l + sigma) ** alpha
    upper = (1.0 - alpha) / (l + sigma - 1.0) ** alpha
    suites["a_bounds"].record(_strictly_below(lower, a_l) & _strictly_below(a_l, upper),
                              witness("a_bounds", value=a_l))

    diff = a_l - a_next
    lower = k / (l + sigma + 1.0) ** (alpha + 1.0)
    upper = k / (l + sigma - 1.0) ** (alpha + 1.0)
    suites["a_difference_bounds"].record(
        _strictly_below(lower, diff) & _strictly_below(diff, upper),
        witness("a_difference_bounds", value=diff))

    lower = k / (12.0 * (l + sigma) ** (alpha + 1.0))
    upper = k / (12.0 * (l + sigma - 1.0) ** (alpha + 1.0))
    suites["b_bounds"].record(_strictly_below(lower, b_l) & _strictly_below(b_l, upper),
                              witness("b_bounds", value=b_l))

    floor = 0.5 * (1.0 - alpha) * (l + sigma) ** (-alpha)
    suites["a_minus_b"].record(_strictly_below(floor, a_l - b_l),
                               witness("a_minus_b", value=a_l - b_l))

    combo = (2.0 * sigma - 1.0) * (a[0] + b[1]) - sigma * (a[1] + b[2] - b[1])
    floor = k / (4.0 * sigma * (1.0 + sigma) ** alpha)
    suites["first_pair_combination"].record(
        combo > floor,
        lambda i: {"suite": "first_pair_combination", "alpha": alpha,
                   "value": float(combo), "bound": float(floor)})

    for index in sorted(i for i in {1, 2, 5, 10, 50, max_level} if i <= max_level):
        a_int = a_coeff_integral(order, index)
        b_int = b_coeff_integral(order, index)
        holds = (abs(a[index] - a_int) <= _INTEGRAL_RTOL * abs(a_int)
                 and abs(b[index] - b_int) <= _INTEGRAL_RTOL * abs(b_int))
        suites["integral_forms"].record(
            holds,
            lambda i, index=index, a_int=a_int, b_int=b_int: {
                "suite": "integral_forms", "alpha": alpha, "l": index,
                "a": float(a[index]), "a_integral": a_int,
                "b": float(b[index]), "b_integral": b_int})


def check_level_coefficients(alpha: float, decay: float, max_level: int, suites: _Suites,
                             tol: float, horizon: float = 1.0) -> None:
    """c_s and g_s properties for every level j = 0..max_level-1 with tau = T/max_level."""
    order = FractionalOrder(alpha)
    sigma = order.sigma
    w = exp_weight(decay)
    tau = horizon / max_level

    for j in range(max_level):
        table = c_coeffs(order, w, tau, j, validate=False, tol=tol)
        c = table.c
        g = table.g
        t = (j + sigma) * tau
        lam_t = float(w(t))

        def witness(suite, s=None, **extra):
            entry = {"suite": suite, "alpha": alpha, "b": decay, "j": j}
            if s is not None:
                entry["s"] = s
            entry.update({key: float(value) for key, value in extra.items()})
            return entry

        suites["c_positive"].record(c > 0, lambda s: witness("c_positive", s, c=c[s]))

        if j >= 1:
            suites["c_monotone"].record(
                np.diff(c) < 0,
                lambda s: witness("c_monotone", s, c_s=c[s], c_next=c[s + 1]))
            bound = 0.5 * (1.0 - alpha) * lam_t / (j + sigma) ** alpha
            suites["c_last_lower_bound"].record(
                c[j] > bound, lambda _: witness("c_last_lower_bound", j, c=c[j], bound=bound))
            pair = (2.0 * sigma - 1.0) * c[0] - sigma * c[1]
            suites["c_first_pair"].record(pair > 0, lambda _: witness("c_first_pair", 0, value=pair))

        if decay == 0.0:
            target = (j + sigma) ** (1.0 - alpha)
            total = float(np.sum(c))
            suites["const_weight_sum"].record(
                abs(total - target) <= _TELESCOPING_RTOL * target,
                lambda _: witness("const_weight_sum", sum=total, target=target))

        floor = lam_t / (2.0 * order.gamma_1 * t ** alpha)
        increasing = bool(np.all(np.diff(g) > 0))
        suites["g_monotone_floor"].record(
            increasing and g[0] > floor,
            lambda _: witness("g_monotone_floor", g0=g[0], floor=floor))
        suites["sigma_admissible"].record(
            sigma_admissible(g, sigma), lambda _: witness("sigma_admissible", g_last=g[-1]))


# ---------------------------------------------------------------------------
# Random-series suites
# ---------------------------------------------------------------------------

def check_random_series(alpha: float, decay: float, cases: int, max_len: int,
                        rng: np.random.Generator, suites: _Suites, tol: float) -> None:
    """Energy inequality and both g-form inequalities on random series in [-1, 1]."""
    order = FractionalOrder(alpha)
    sigma = order.sigma
    w = exp_weight(decay)

    for case in range(cases):
        n = int(rng.integers(2, max_len + 1))
        values = rng.uniform(-1.0, 1.0, size=n)
        j = n - 2
        tau = 1.0 / (n - 1)
        table = c_coeffs(order, w, tau, j, validate=False, tol=tol)

        series = TimeSeries(tau=tau, values=values)
        squares = TimeSeries(tau=tau, values=values ** 2)
        dv = apply_discrete(series, order, w, j, table=table)
        dv2 = apply_discrete(squares, order, w, j, table=table)

        def witness(suite, lhs, rhs):
            return lambda _: {"suite": suite, "alpha": alpha, "b": decay, "case": case,
                              "j": j, "lhs": float(lhs), "rhs": float(rhs)}

        g = table.g
        gv = g_delta(values, g)
        gv2 = g_delta(values ** 2, g)
        g_prev = g[-2] if g.size > 1 else 0.0
        # both sides cancel when neighbouring values nearly agree; the slack
        # follows the size of the summed terms instead
        vmax = float(np.max(np.abs(values)))
        mass = float(np.sum(g * np.abs(np.diff(values))))
        scale = 2.0 * mass * vmax

        lhs = (sigma * values[-1] + (1.0 - sigma) * values[-2]) * dv
        rhs = 0.5 * dv2
        suites["energy_inequality"].record(_below(rhs, lhs, scale),
                                           witness("energy_inequality", lhs, rhs))

        lhs = values[-1] * gv
        rhs = 0.5 * gv2 + gv ** 2 / (2.0 * g[-1])
        suites["g_form_upper"].record(_below(rhs, lhs, scale + mass ** 2 / g[-1]),
                                      witness("g_form_upper", lhs, rhs))

        lhs = values[-2] * gv
        rhs = 0.5 * gv2 - gv ** 2 / (2.0 * (g[-1] - g_prev))
        suites["g_form_lower"].record(_below(rhs, lhs, scale + mass ** 2 / (g[-1] - g_prev)),
                                      witness("g_form_lower", lhs, rhs))


def check_spatial_operators(cases: int, max_len: int, rng: np.random.Generator,
                            suites: _Suites) -> None:
    """Coercivity of -Lambda and the H_h norm equivalence on random grid functions."""
    for case in range(cases):
        N = int(rng.integers(2, max_len + 1))
        h = 1.0 / N
        y = np.zeros(N + 1)
        y[1:-1] = rng.uniform(-1.0, 1.0, size=N - 1)
        a = rng.uniform(1.0, 2.0, size=N)
        d = rng.uniform(0.0, 2.0, size=N - 1)

        ratio = coercivity_ratio(a, d, h, 1.0, y)
        suites["coercivity"].record(
            ratio >= 1.0 - _SLACK,
            lambda _: {"suite": "coercivity", "case": case, "N": N, "ratio": float(ratio)})

        norm = l2_norm(y[1:-1], h) ** 2
        h_norm = l2_norm(apply_Hh(y, h), h) ** 2
        holds = bool(_below(5.0 / 12.0 * norm, h_norm)) and bool(_below(h_norm, norm))
        suites["norm_equivalence"].record(
            holds,
            lambda _: {"suite": "norm_equivalence", "case": case, "N": N,
                       "norm": float(norm), "h_norm": float(h_norm)})


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def _combo_batch(alpha: float, decay: float, properties: PropertyConfig,
                 rng: np.random.Generator, tol: float) -> Dict[str, SuiteResult]:
    suites = _Suites(properties.max_witnesses)
    check_level_coefficients(alpha, decay, properties.max_level, suites, tol)
    check_random_series(alpha, decay, properties.random_cases, properties.max_series_len,
                        rng, suites, tol)
    return suites.results


def run_verification(properties: Optional[PropertyConfig] = None, seed: Optional[int] = None,
                     jobs: int = 1, tol: Optional[float] = None) -> VerificationReport:
    """
    Run every property suite.

    Random streams are spawned from one SeedSequence per (alpha, b) batch, so the
    report is identical for any number of jobs.

    Args:
        properties: Sizes, alpha and decay lists
        seed: Overrides properties.seed
        jobs: Worker threads across batches
        tol: Cancellation tolerance of the a/b cache
    """
    properties = properties or DEFAULT_CONFIG.properties
    seed = properties.seed if seed is None else seed
    tol = DEFAULT_CONFIG.coefficients.cancellation_tol if tol is None else tol
    combos: List[Tuple[float, float]] = [(float(a), float(b)) for a in properties.alphas
                                         for b in properties.decay_rates]
    streams = np.random.SeedSequence(seed).spawn(len(combos) + 1)

    def run(index: int) -> Dict[str, SuiteResult]:
        alpha, decay = combos[index]
        return _combo_batch(alpha, decay, properties, np.random.default_rng(streams[index]), tol)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            batches = list(executor.map(run, range(len(combos))))
    else:
        batches = [run(index) for index in range(len(combos))]

    merged = _Suites(properties.max_witnesses)
    for alpha in properties.alphas:
        check_power_coefficients(float(alpha), properties.max_level, merged, tol)
    for batch in batches:
        for name, result in batch.items():
            merged[name].merge(result)
    check_spatial_operators(properties.random_cases, properties.max_series_len,
                            np.random.default_rng(streams[-1]), merged)

    report = VerificationReport(
        suites=merged.results,
        settings={
            "seed": seed,
            "alphas": [float(a) for a in properties.alphas],
            "decay_rates": [float(b) for b in properties.decay_rates],
            "max_level": properties.max_level,
            "random_cases": properties.random_cases,
            "max_series_len": properties.max_series_len,
        },
    )
    for name, suite in sorted(report.suites.items()):
        logger.info(f"Suite {name}: {suite.checked - suite.violations}/{suite.checked} passed")
    if not report.passed:
        logger.warning(f"Verification failed: {', '.join(report.failures)}")
    return report
