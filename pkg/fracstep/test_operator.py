import math

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracstep.exceptions import ArgumentError, QuadratureError
from fracstep.models import FractionalOrder, TimeSeries
from fracstep.operator import (
    apply_discrete,
    g_delta,
    order_study,
    reference_derivative,
    sigma_admissible,
    smooth_function,
)
from fracstep.weights import c_coeffs, const_weight, exp_weight


def get_series(func, tau, n):
    return TimeSeries(tau=tau, values=np.array([func(s * tau) for s in range(n)]))


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("j", [0, 1, 9])
def test_linear_function_is_exact_for_constant_weight(alpha, j):
    order = FractionalOrder(alpha)
    tau = 0.1
    series = get_series(lambda t: t, tau, j + 2)
    t = (j + order.sigma) * tau
    expected = t ** (1 - alpha) / math.gamma(2 - alpha)
    assert apply_discrete(series, order, const_weight(), j) == pytest.approx(expected, rel=1e-12)


def test_reference_derivative_of_linear_function():
    t = 0.7
    value = reference_derivative(lambda eta: 1.0, 0.4, const_weight(), t)
    assert value == pytest.approx(t ** 0.6 / math.gamma(1.6), abs=1e-10)


def test_reference_derivative_reports_unreached_tolerance():
    with pytest.raises(QuadratureError) as excinfo:
        reference_derivative(lambda eta: math.cos(200.0 * eta), 0.5, exp_weight(1.0), 1.0,
                             tol=1e-14, limit=2)
    assert excinfo.value.achieved_error > 1e-14


def test_reference_derivative_rejects_invalid_quadrature_settings():
    def dv(eta):
        return 3.0 * eta * eta

    with pytest.raises(ArgumentError):
        reference_derivative(dv, 0.5, exp_weight(1.0), 1.0, limit=1)
    with pytest.raises(QuadratureError) as excinfo:
        reference_derivative(dv, 0.5, exp_weight(1.0), 1.0, tol=0.0)
    assert excinfo.value.achieved_error == math.inf


def test_apply_discrete_argument_errors():
    series = get_series(lambda t: t * t, 0.1, 4)
    with pytest.raises(ArgumentError):
        apply_discrete(series, 0.5, const_weight(), 3)
    with pytest.raises(ArgumentError):
        apply_discrete(series, 0.5, const_weight(), -1)
    table = c_coeffs(0.5, const_weight(), 0.1, 1)
    with pytest.raises(ArgumentError):
        apply_discrete(series, 0.5, const_weight(), 2, table=table)
    with pytest.raises(ArgumentError):
        reference_derivative(lambda eta: 1.0, 0.5, const_weight(), 0.0)


@seed(7)
@settings(max_examples=60, deadline=None)
@given(u=arrays(np.float64, 12, elements=st.floats(-1, 1)),
       v=arrays(np.float64, 12, elements=st.floats(-1, 1)),
       scale=st.floats(-3, 3))
def test_discrete_operator_is_linear(u, v, scale):
    w = exp_weight(2.0)
    tau = 1 / 11
    j = 10
    combined = apply_discrete(TimeSeries(tau, scale * u + v), 0.6, w, j)
    separate = (scale * apply_discrete(TimeSeries(tau, u), 0.6, w, j)
                + apply_discrete(TimeSeries(tau, v), 0.6, w, j))
    assert combined == pytest.approx(separate, rel=1e-12, abs=1e-10)


def test_g_form_matches_discrete_operator():
    values = np.array([0.0, 0.3, -0.2, 0.5, 0.1])
    table = c_coeffs(0.5, exp_weight(1.0), 0.25, 3)
    series = TimeSeries(0.25, values)
    direct = apply_discrete(series, 0.5, exp_weight(1.0), 3, table=table)
    assert g_delta(values, table.g) == pytest.approx(direct, rel=1e-13)
    with pytest.raises(ArgumentError):
        g_delta(values[:-1], table.g)


def test_sigma_admissible():
    assert sigma_admissible(np.array([2.0]), 0.75)
    assert sigma_admissible(np.array([1.0, 3.0]), 0.75)
    assert not sigma_admissible(np.array([1.0, 1.2]), 0.6)
    table = c_coeffs(0.9, exp_weight(3.0), 0.01, 40)
    assert sigma_admissible(table.g, table.sigma)


def test_smooth_functions():
    v, dv = smooth_function("t3exp", b=2.0)
    # v(t) = int_0^t s^3 e^{-2s} ds, checked against a trapezoid sum
    s = np.linspace(0.0, 0.8, 4001)
    assert v(0.8) == pytest.approx(np.trapezoid(s ** 3 * np.exp(-2 * s), s), rel=1e-6)
    assert dv(0.5) == pytest.approx(0.125 * math.exp(-1.0))
    with pytest.raises(ArgumentError):
        smooth_function("t4")


def test_order_study_linear_constant_weight_is_exact():
    v, dv = smooth_function("t")
    report = order_study(v, dv, 0.5, const_weight(), 1.0, [10, 20, 40])
    assert report.exact
    assert report.slopes == []
    assert max(report.errors) < 1e-12


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_order_study_cubic_exponential_weight(alpha):
    v, dv = smooth_function("t3")
    report = order_study(v, dv, alpha, exp_weight(1.0), 1.0, [20, 40, 80, 160], jobs=2)
    assert not report.exact
    assert report.finest_slope == pytest.approx(2.0, abs=0.1), report.to_dict()


def test_order_study_step_checks():
    v, dv = smooth_function("t2")
    with pytest.raises(ArgumentError):
        order_study(v, dv, 0.5, const_weight(), 1.0, [20, 10])
    with pytest.raises(ArgumentError):
        order_study(v, dv, 0.5, const_weight(), 1.0, [])
