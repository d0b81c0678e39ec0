"""
Problem definitions for the generalized time-fractional diffusion equation

    d^{alpha,lambda} u = (k u_x)_x - q u + f,  0 < x < l, 0 < t <= T,
    u(0, t) = u(l, t) = 0,  u(x, 0) = u0(x).

Two manufactured problems are built in; custom problems are read from
expression strings in a small arithmetic grammar.
"""

import json
import logging
import math
import re
from dataclasses import dataclass
from typing import Any, Callable, Dict, Mapping, Optional, Union

import numpy as np
import sympy as sp
from scipy import special
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

from .exceptions import ArgumentError, ProblemValidationError
from .models import FractionalOrder, ProblemKind, ProblemSpec, WeightFunction
from .operator import reference_derivative
from .weights import exp_weight, make_weight

logger = logging.getLogger(__name__)

X, T = sp.symbols("x t", real=True)

_VALIDATION_X = 65
_VALIDATION_T = 33
_BOUNDARY_TOL = 1e-12
_INITIAL_TOL = 1e-10


def sample(func: Callable, x: np.ndarray, t: float) -> np.ndarray:
    """Evaluate a coefficient at nodes x and time t as a float array shaped like x."""
    values = np.asarray(func(x, t), dtype=float)
    return np.array(np.broadcast_to(values, np.shape(x)), dtype=float)


# ---------------------------------------------------------------------------
# Built-in manufactured problems
# ---------------------------------------------------------------------------

def _check_builtin_args(b: float, alpha: float) -> FractionalOrder:
    if not (math.isfinite(b) and b > 0):
        raise ArgumentError(f"decay rate b must be > 0 for the built-in problems, got {b}")
    return FractionalOrder(alpha)


def make_test1(b: float, alpha: float) -> ProblemSpec:
    """
    Variable-coefficient problem with exact solution u = sin(pi x) g(t),
    g(t) = 1 + (6 - (6 + 6bt + 3b^2t^2 + b^3t^3) e^{-bt})/b^4,
    k = 2 - cos(xt), q = 1 - sin(xt), lambda = e^{-bt}, T = 1.

    g is evaluated as 1 + 6 P(4, bt)/b^4 with P the regularized lower
    incomplete gamma function, which avoids the cancellation of the closed
    form for small bt.
    """
    order = _check_builtin_args(b, alpha)
    b = float(b)
    alpha = order.alpha
    gamma_5 = math.gamma(5.0 - alpha)

    def g(t):
        return 1.0 + 6.0 * special.gammainc(4.0, b * np.asarray(t, dtype=float)) / b ** 4

    def k(x, t):
        return 2.0 - np.cos(x * t)

    def q(x, t):
        return 1.0 - np.sin(x * t)

    def f(x, t):
        sx = np.sin(np.pi * x)
        gt = g(t)
        caputo = 6.0 * np.exp(-b * t) * t ** (4.0 - alpha) / gamma_5
        return (sx * caputo
                - np.pi * t * np.sin(x * t) * np.cos(np.pi * x) * gt
                + np.pi ** 2 * (2.0 - np.cos(x * t)) * sx * gt
                + (1.0 - np.sin(x * t)) * sx * gt)

    def u0(x):
        return np.sin(np.pi * x)

    def exact(x, t):
        return np.sin(np.pi * x) * g(t)

    bs = sp.Float(b)
    g_sym = 1 + (6 - (6 + 6 * bs * T + 3 * bs ** 2 * T ** 2 + bs ** 3 * T ** 3)
                 * sp.exp(-bs * T)) / bs ** 4
    symbolic = {
        "k": 2 - sp.cos(X * T),
        "q": 1 - sp.sin(X * T),
        "u": sp.sin(sp.pi * X) * g_sym,
    }

    return ProblemSpec(
        name="test1", alpha=alpha, weight=exp_weight(b), k=k, q=q, f=f, u0=u0,
        length=1.0, horizon=1.0, exact=exact, kind=ProblemKind.GENERAL,
        params={"b": b}, symbolic=symbolic,
    )


def make_test2(b: float, alpha: float) -> ProblemSpec:
    """
    Time-only-coefficient problem with exact solution u = g(t) sin(pi x),
    g(t) = 1 + (2 - (2 + 2bt + b^2t^2) e^{-bt})/b^3,
    k = 2 - sin(3t), q = 1 - cos(2t), lambda = e^{-bt}, T = 1.
    """
    order = _check_builtin_args(b, alpha)
    b = float(b)
    alpha = order.alpha
    gamma_4 = math.gamma(4.0 - alpha)

    def g(t):
        return 1.0 + 2.0 * special.gammainc(3.0, b * np.asarray(t, dtype=float)) / b ** 3

    def k(x, t):
        return np.full(np.shape(x), 2.0 - math.sin(3.0 * t))

    def q(x, t):
        return np.full(np.shape(x), 1.0 - math.cos(2.0 * t))

    def f(x, t):
        gt = g(t)
        kt = 2.0 - math.sin(3.0 * t)
        qt = 1.0 - math.cos(2.0 * t)
        caputo = 2.0 * t ** (3.0 - alpha) * math.exp(-b * t) / gamma_4
        return (np.pi ** 2 * gt * kt + gt * qt + caputo) * np.sin(np.pi * x)

    def u0(x):
        return np.sin(np.pi * x)

    def exact(x, t):
        return g(t) * np.sin(np.pi * x)

    bs = sp.Float(b)
    g_sym = 1 + (2 - (2 + 2 * bs * T + bs ** 2 * T ** 2) * sp.exp(-bs * T)) / bs ** 3
    symbolic = {
        "k": 2 - sp.sin(3 * T),
        "q": 1 - sp.cos(2 * T),
        "u": g_sym * sp.sin(sp.pi * X),
    }

    return ProblemSpec(
        name="test2", alpha=alpha, weight=exp_weight(b), k=k, q=q, f=f, u0=u0,
        length=1.0, horizon=1.0, exact=exact, kind=ProblemKind.TIME_ONLY,
        params={"b": b}, symbolic=symbolic,
    )


BUILTIN_PROBLEMS = {
    "test1": make_test1,
    "test2": make_test2,
}


# ---------------------------------------------------------------------------
# Expression grammar
# ---------------------------------------------------------------------------

_ALLOWED_NAMES = {"x", "t", "pi", "sin", "cos", "exp"}
_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r")"
)
_GLOBALS = {
    "Integer": sp.Integer,
    "Float": sp.Float,
    "Rational": sp.Rational,
    "Symbol": sp.Symbol,
    "sin": sp.sin,
    "cos": sp.cos,
    "exp": sp.exp,
    "pi": sp.pi,
    "__builtins__": {},
}
_TRANSFORMATIONS = standard_transformations + (convert_xor,)


def _tokenize(text: str, field_name: str) -> None:
    position = 0
    stripped = text.rstrip()
    while position < len(stripped):
        match = _TOKEN.match(stripped, position)
        if match is None or match.end() == position:
            raise ProblemValidationError(
                f"cannot parse {field_name!r} near {stripped[position:position + 10]!r}")
        name = match.group("name")
        if name is not None and name not in _ALLOWED_NAMES:
            raise ProblemValidationError(
                f"unknown name {name!r} in {field_name!r}; allowed: x, t, pi, sin, cos, exp")
        position = match.end()


def parse_expression(text: Union[str, int, float], field_name: str = "expression") -> sp.Expr:
    """
    Parse +, -, *, /, ^, sin, cos, exp, pi, x and t into a sympy expression.

    Raises:
        ProblemValidationError: anything outside the grammar
    """
    if isinstance(text, int) and not isinstance(text, bool):
        return sp.Integer(text)
    if isinstance(text, float):
        if not math.isfinite(text):
            raise ProblemValidationError(f"{field_name!r} must be finite, got {text}")
        return sp.Float(text)
    if not isinstance(text, str) or not text.strip():
        raise ProblemValidationError(f"{field_name!r} must be a non-empty expression string")
    _tokenize(text, field_name)
    try:
        expr = parse_expr(text, local_dict={"x": X, "t": T}, global_dict=dict(_GLOBALS),
                          transformations=_TRANSFORMATIONS)
    except (SyntaxError, TypeError, ValueError, AttributeError, sp.SympifyError) as e:
        raise ProblemValidationError(f"cannot parse {field_name!r}: {e}") from e
    except Exception as e:
        # sympy's tokenizer raises its own TokenError for unbalanced input
        raise ProblemValidationError(f"cannot parse {field_name!r}: {e}") from e

    if not isinstance(expr, sp.Expr):
        raise ProblemValidationError(f"{field_name!r} is not an arithmetic expression")
    if expr.atoms(sp.core.function.AppliedUndef):
        raise ProblemValidationError(f"{field_name!r} calls an unknown function")
    extra = expr.free_symbols - {X, T}
    if extra:
        raise ProblemValidationError(
            f"{field_name!r} uses unknown symbols {sorted(str(s) for s in extra)}")
    return expr


def compile_expression(expr: sp.Expr) -> Callable[[np.ndarray, float], np.ndarray]:
    """Vectorized (x, t) -> values shaped like x."""
    fn = sp.lambdify((X, T), expr, modules="numpy")

    def evaluate(x, t):
        return np.broadcast_to(np.asarray(fn(x, t), dtype=float), np.shape(x))

    return evaluate


def _weight_from_config(config: Mapping[str, Any]) -> WeightFunction:
    weight = config.get("weight")
    if weight is None:
        return exp_weight(float(config.get("b", 0.0)))
    if isinstance(weight, str):
        return make_weight(weight, **({"b": config["b"]} if "b" in config else {}))
    params = {key: value for key, value in weight.items() if key != "name"}
    return make_weight(weight.get("name", "exp"), **params)


def _custom_problem(config: Mapping[str, Any]) -> ProblemSpec:
    missing = [key for key in ("k", "q", "f", "u0") if key not in config]
    if missing:
        raise ProblemValidationError(f"custom problem is missing {', '.join(missing)}")
    if "alpha" not in config:
        raise ProblemValidationError("custom problem needs alpha")

    exprs = {key: parse_expression(config[key], key) for key in ("k", "q", "f", "u0")}
    exact_expr = parse_expression(config["exact"], "exact") if config.get("exact") is not None else None

    k = compile_expression(exprs["k"])
    q = compile_expression(exprs["q"])
    f = compile_expression(exprs["f"])
    u0_xt = compile_expression(exprs["u0"])

    def u0(x):
        return u0_xt(x, 0.0)

    exact = compile_expression(exact_expr) if exact_expr is not None else None
    time_only = X not in exprs["k"].free_symbols and X not in exprs["q"].free_symbols

    symbolic = dict(exprs)
    if exact_expr is not None:
        symbolic["u"] = exact_expr

    return ProblemSpec(
        name=str(config.get("name", "custom")),
        alpha=float(config["alpha"]),
        weight=_weight_from_config(config),
        k=k, q=q, f=f, u0=u0,
        length=float(config.get("length", 1.0)),
        horizon=float(config.get("horizon", 1.0)),
        exact=exact,
        kind=ProblemKind.TIME_ONLY if time_only else ProblemKind.GENERAL,
        params={key: str(config[key]) for key in ("k", "q", "f", "u0", "exact") if config.get(key) is not None},
        symbolic=symbolic,
    )


def load_problem(config: Union[str, Mapping[str, Any]]) -> ProblemSpec:
    """
    Build and validate a problem from a config block.

    Args:
        config: Mapping or JSON text. Built-ins: {"problem": "test1", "b": 1.0,
            "alpha": 0.9}. Custom: {"problem": "custom", "alpha": ..., "k": "...",
            "q": "...", "f": "...", "u0": "...", optional "exact", "weight",
            "b", "length", "horizon", "name"}

    Raises:
        ProblemValidationError: parse errors or constraint violations
    """
    if isinstance(config, str):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as e:
            raise ProblemValidationError(f"problem config is not valid JSON: {e}") from e
    if not isinstance(config, Mapping):
        raise ProblemValidationError("problem config must be a mapping")

    name = config.get("problem", "custom")
    if name in BUILTIN_PROBLEMS:
        if "b" not in config or "alpha" not in config:
            raise ProblemValidationError(f"built-in problem {name!r} needs b and alpha")
        try:
            problem = BUILTIN_PROBLEMS[name](float(config["b"]), float(config["alpha"]))
        except ArgumentError as e:
            raise ProblemValidationError(str(e)) from e
    elif name == "custom":
        try:
            problem = _custom_problem(config)
        except ArgumentError as e:
            raise ProblemValidationError(str(e)) from e
    else:
        raise ProblemValidationError(
            f"unknown problem {name!r}; expected {', '.join(sorted(BUILTIN_PROBLEMS))} or custom")

    validate_problem(problem)
    logger.debug(f"Loaded problem {problem.name}: {problem.describe()}")
    return problem


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemBounds:
    """Sampled coefficient bounds of a validated problem."""
    c1: float
    c2: float
    q_min: float
    q_max: float


def validate_problem(problem: ProblemSpec) -> ProblemBounds:
    """
    Check the standing assumptions on a dense sample of [0, l] x [0, T].

    Raises:
        ProblemValidationError: k <= 0, q < 0, u0 boundary mismatch,
            exact(x, 0) != u0(x), non-finite data, or x-dependent
            coefficients on a time-only problem
    """
    try:
        FractionalOrder(problem.alpha)
    except ArgumentError as e:
        raise ProblemValidationError(str(e)) from e
    if not (problem.length > 0 and problem.horizon > 0):
        raise ProblemValidationError("domain length and horizon must be positive")

    x = np.linspace(0.0, problem.length, _VALIDATION_X)
    times = np.linspace(0.0, problem.horizon, _VALIDATION_T)

    k_values = np.array([sample(problem.k, x, t) for t in times])
    q_values = np.array([sample(problem.q, x, t) for t in times])
    f_values = np.array([sample(problem.f, x, t) for t in times])
    for label, values in (("k", k_values), ("q", q_values), ("f", f_values)):
        if not np.all(np.isfinite(values)):
            raise ProblemValidationError(f"{label} has non-finite values on [0, l] x [0, T]")

    c1 = float(k_values.min())
    if c1 <= 0:
        raise ProblemValidationError(f"k must satisfy k >= c1 > 0, sampled min is {c1:.6g}")
    q_min = float(q_values.min())
    if q_min < 0:
        raise ProblemValidationError(f"q must be >= 0, sampled min is {q_min:.6g}")

    if problem.kind == ProblemKind.TIME_ONLY:
        spread = max(np.ptp(k_values, axis=1).max(), np.ptp(q_values, axis=1).max())
        if spread > 1e-12 * max(1.0, float(np.abs(k_values).max())):
            raise ProblemValidationError("time-only problem has x-dependent k or q")

    u0 = np.broadcast_to(np.asarray(problem.u0(x), dtype=float), x.shape)
    if not np.all(np.isfinite(u0)):
        raise ProblemValidationError("u0 has non-finite values")
    if abs(u0[0]) > _BOUNDARY_TOL or abs(u0[-1]) > _BOUNDARY_TOL:
        raise ProblemValidationError(
            f"u0 must vanish at both ends, got u0(0)={u0[0]:.3g}, u0(l)={u0[-1]:.3g}")

    if problem.exact is not None:
        at_zero = sample(problem.exact, x, 0.0)
        if np.max(np.abs(at_zero - u0)) > _INITIAL_TOL:
            raise ProblemValidationError("exact(x, 0) does not match u0(x)")

    return ProblemBounds(c1=c1, c2=float(k_values.max()), q_min=q_min,
                         q_max=float(q_values.max()))


def oracle_source(problem: ProblemSpec, x: float, t: float, tol: Optional[float] = None) -> float:
    """
    f(x, t) rebuilt from the symbolic exact solution: the time part by the
    quadrature oracle applied to u(x, .), the space part -(k u_x)_x + q u by
    symbolic differentiation.
    """
    if not problem.symbolic or "u" not in problem.symbolic:
        raise ArgumentError(f"problem {problem.name} carries no symbolic exact solution")
    u = problem.symbolic["u"]
    k = problem.symbolic["k"]
    q = problem.symbolic["q"]

    du_dt = sp.lambdify(T, sp.diff(u, T).subs(X, x), modules="math")
    time_part = reference_derivative(du_dt, problem.order, problem.weight, t, tol=tol)

    space = -sp.diff(k * sp.diff(u, X), X) + q * u
    space_part = float(space.subs({X: x, T: t}).evalf())
    return time_part + space_part


def describe_builtins() -> Dict[str, str]:
    return {name: (builder.__doc__ or "").strip().splitlines()[0]
            for name, builder in BUILTIN_PROBLEMS.items()}
