import numpy as np
import pytest
import sympy as sp

from fracstep.exceptions import ArgumentError, ProblemValidationError
from fracstep.models import ProblemKind
from fracstep.problems import (
    T,
    X,
    describe_builtins,
    load_problem,
    make_test1,
    make_test2,
    oracle_source,
    parse_expression,
    validate_problem,
)


def get_custom_config(**overrides):
    config = {"problem": "custom", "alpha": 0.5, "k": "1 + x^2", "q": "t",
              "f": "sin(pi*x)", "u0": "sin(pi*x)"}
    config.update(overrides)
    return config


def test_builtin_kinds():
    assert load_problem({"problem": "test1", "b": 1.0, "alpha": 0.9}).kind == ProblemKind.GENERAL
    assert load_problem({"problem": "test2", "b": 2.0, "alpha": 0.5}).kind == ProblemKind.TIME_ONLY
    assert set(describe_builtins()) == {"test1", "test2"}


def test_builtin_argument_checks():
    with pytest.raises(ArgumentError):
        make_test1(0.0, 0.5)
    with pytest.raises(ArgumentError):
        make_test2(1.0, 1.5)
    with pytest.raises(ProblemValidationError):
        load_problem({"problem": "test1", "alpha": 0.5})
    with pytest.raises(ProblemValidationError):
        load_problem({"problem": "test3", "b": 1.0, "alpha": 0.5})


@pytest.mark.parametrize("builder", [make_test1, make_test2])
def test_exact_solution_matches_initial_data(builder):
    problem = builder(2.0, 0.5)
    x = np.linspace(0.0, 1.0, 21)
    np.testing.assert_allclose(problem.exact(x, 0.0), problem.u0(x), atol=1e-14)
    bounds = validate_problem(problem)
    assert bounds.c1 >= 1.0
    assert bounds.q_min >= 0.0


def test_time_factor_matches_closed_form():
    b, t = 2.0, 0.7
    closed = 1 + (6 - (6 + 6 * b * t + 3 * b ** 2 * t ** 2 + b ** 3 * t ** 3) * np.exp(-b * t)) / b ** 4
    assert make_test1(b, 0.5).exact(np.array([0.5]), t)[0] == pytest.approx(closed, rel=1e-13)
    closed = 1 + (2 - (2 + 2 * b * t + b ** 2 * t ** 2) * np.exp(-b * t)) / b ** 3
    assert make_test2(b, 0.5).exact(np.array([0.5]), t)[0] == pytest.approx(closed, rel=1e-13)


@pytest.mark.parametrize("b,alpha", [(1.0, 0.9), (2.0, 0.5), (3.0, 0.1)])
def test_manufactured_source_matches_oracle(b, alpha):
    problem = make_test1(b, alpha)
    rng = np.random.default_rng(int(10 * b))
    for x, t in zip(rng.uniform(0.0, 1.0, 20), rng.uniform(0.02, 1.0, 20)):
        closed = float(problem.f(np.array([x]), t)[0])
        assert closed == pytest.approx(oracle_source(problem, x, t), abs=1e-7), (x, t)


def test_manufactured_source_time_only_problem():
    problem = make_test2(2.0, 0.5)
    for x, t in [(0.3, 0.2), (0.8, 0.9)]:
        closed = float(problem.f(np.array([x]), t)[0])
        assert closed == pytest.approx(oracle_source(problem, x, t), abs=1e-7)


def test_parse_expression_grammar():
    assert parse_expression("x^2 + 2*t") == X ** 2 + 2 * T
    assert parse_expression("exp(-t)*sin(pi*x)") == sp.exp(-T) * sp.sin(sp.pi * X)
    assert parse_expression(3) == 3
    assert isinstance(parse_expression(3), sp.Integer)
    assert float(parse_expression(2.5)) == 2.5
    with pytest.raises(ProblemValidationError):
        parse_expression(float("nan"), "k")
    for bad in ["__import__('os')", "y + 1", "log(x)", "x +", "", "x; t", "lambda: 1"]:
        with pytest.raises(ProblemValidationError):
            parse_expression(bad, "k")


def test_custom_problem_kinds():
    assert load_problem(get_custom_config()).kind == ProblemKind.GENERAL
    problem = load_problem(get_custom_config(k="2 - sin(3*t)", q="1"))
    assert problem.kind == ProblemKind.TIME_ONLY
    assert problem.params["k"] == "2 - sin(3*t)"


@pytest.mark.parametrize("overrides,message", [
    ({"k": "x - 0.5"}, "k must satisfy"),
    ({"q": "-1"}, "q must be >= 0"),
    ({"u0": "x"}, "vanish"),
    ({"exact": "2*sin(pi*x)"}, "exact(x, 0)"),
    ({"f": "1/x"}, "non-finite"),
])
def test_custom_problem_validation(overrides, message):
    with pytest.raises(ProblemValidationError, match=message.replace("(", r"\(").replace(")", r"\)")):
        load_problem(get_custom_config(**overrides))


def test_custom_problem_needs_every_field():
    config = get_custom_config()
    del config["f"]
    with pytest.raises(ProblemValidationError, match="missing f"):
        load_problem(config)


def test_load_problem_from_json_text():
    problem = load_problem('{"problem": "test2", "b": 3, "alpha": 0.1}')
    assert problem.params["b"] == 3.0
    with pytest.raises(ProblemValidationError):
        load_problem("{not json")
