import numpy as np
import pytest

from fracstep import weights
from fracstep.analysis import render_json
from fracstep.config import PropertyConfig
from fracstep.verification import SUITE_DESCRIPTIONS, SuiteResult, run_verification


def test_small_configuration_passes(small_properties, fresh_coefficients):
    report = run_verification(small_properties)
    assert report.passed, report.failures
    assert set(report.suites) == set(SUITE_DESCRIPTIONS)
    assert report.suites["c_monotone"].checked > 0
    assert report.suites["energy_inequality"].checked == 40 * 4
    assert report.suites["const_weight_sum"].checked == 2 * 64


def test_report_is_deterministic(small_properties):
    first = render_json(run_verification(small_properties).to_dict())
    second = render_json(run_verification(small_properties).to_dict())
    threaded = render_json(run_verification(small_properties, jobs=3).to_dict())
    assert first == second == threaded


def test_seed_changes_random_cases_only(small_properties):
    base = run_verification(small_properties).to_dict()
    other = run_verification(small_properties, seed=12345).to_dict()
    assert other["settings"]["seed"] == 12345
    assert base["suites"]["c_positive"] == other["suites"]["c_positive"]


def test_negated_b_is_caught(monkeypatch, fresh_coefficients):
    original = weights._b_values
    monkeypatch.setattr(weights, "_b_values", lambda alpha, l, tol: -original(alpha, l, tol))
    properties = PropertyConfig(alphas=[0.5], decay_rates=[1.0], max_level=16,
                                random_cases=5, max_series_len=8)
    report = run_verification(properties)
    assert not report.passed
    suite = report.suites["b_bounds"]
    assert suite.violations == 16
    witness = suite.witnesses[0]
    assert witness["alpha"] == 0.5 and witness["l"] == 1 and witness["value"] < 0
    assert len(suite.witnesses) == properties.max_witnesses


def test_suite_result_counts_and_caps_witnesses():
    suite = SuiteResult("demo", "x > 0", max_witnesses=2)
    suite.record(np.array([True, False, False, False]), lambda i: {"i": i})
    suite.record(False, lambda i: {"i": "scalar"})
    assert suite.checked == 5
    assert suite.violations == 4
    assert suite.witnesses == [{"i": 1}, {"i": 2}]
    assert not suite.passed

    other = SuiteResult("demo", "x > 0", max_witnesses=2)
    other.record(True, lambda i: {})
    other.merge(suite)
    assert other.checked == 6 and other.violations == 4 and len(other.witnesses) == 2


@pytest.mark.slow
def test_default_suites_pass():
    report = run_verification(PropertyConfig(), jobs=4)
    assert report.passed, {name: report.suites[name].witnesses for name in report.failures}
    assert report.suites["energy_inequality"].checked == 500 * 20


def test_small_max_level_skips_out_of_range_integral_checks(fresh_coefficients):
    properties = PropertyConfig(alphas=[0.2, 0.8], decay_rates=[1.0], max_level=8,
                                random_cases=5, max_series_len=8)
    report = run_verification(properties)
    assert report.passed, report.failures
    # l in {1, 2, 5, 8} per alpha
    assert report.suites["integral_forms"].checked == 2 * 4
