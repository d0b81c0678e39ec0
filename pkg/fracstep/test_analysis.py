import json
import math

import numpy as np
import pytest

from fracstep import analysis
from fracstep.analysis import (
    CSV_COLUMNS,
    PRESETS,
    Coupling,
    convergence_order,
    format_float,
    parse_step,
    render_csv,
    render_json,
    render_markdown,
    render_reports,
    resolve_levels,
    round_floats,
    run_preset,
    run_study,
    stability_audit,
    write_output,
)
from fracstep.exceptions import ArgumentError, NumericalError, StudyError
from fracstep.models import CouplingKind, SchemeType, SolutionHistory, SpatialGrid
from fracstep.problems import load_problem, make_test1, make_test2
from fracstep.solver import solve


def get_unforced_problem():
    # no exact solution: studies fall back to self-convergence
    return load_problem({"problem": "custom", "alpha": 0.5, "k": "1", "q": "0",
                         "f": "t^3*sin(pi*x)", "u0": "0"})


def get_relative_deviation(value, reference):
    return abs(value - reference) / reference


def test_convergence_order():
    assert convergence_order(4e-4, 1e-4, 0.1, 0.05) == pytest.approx(2.0)
    assert convergence_order(1.6e-3, 1e-4, 0.5, 0.25) == pytest.approx(4.0)
    assert convergence_order(None, 1e-4, 0.1, 0.05) is None
    assert convergence_order(0.0, 1e-4, 0.1, 0.05) is None


def test_parse_step():
    assert parse_step("1/10") == pytest.approx(0.1)
    assert parse_step("0.25") == 0.25
    assert parse_step(0.5) == 0.5
    with pytest.raises(ArgumentError):
        parse_step("a tenth")


def test_resolve_levels_couplings():
    linear = Coupling(CouplingKind.TAU_LINEAR, constant=3.0)
    assert resolve_levels(linear, ["1/10", "1/20"], 1.0, 1.0) == [(30, 10), (60, 20)]

    fixed = Coupling(CouplingKind.FIX_H, fixed=1 / 500)
    assert resolve_levels(fixed, ["1/20"], 1.0, 1.0) == [(500, 20)]

    by_h = Coupling(CouplingKind.TAU_QUADRATIC, constant=16.0, drive="h")
    assert resolve_levels(by_h, ["1/4", "1/8", "1/16"], 1.0, 1.0) == [(4, 1), (8, 4), (16, 16)]


def test_non_integer_grid_is_rejected_or_rounded():
    exact = Coupling(CouplingKind.TAU_QUADRATIC, constant=16.0)
    with pytest.raises(StudyError, match="level 0"):
        resolve_levels(exact, ["1/10"], 1.0, 1.0)

    nearest = Coupling(CouplingKind.TAU_QUADRATIC, constant=16.0, rounding="nearest")
    notes = []
    assert resolve_levels(nearest, ["1/10"], 1.0, 1.0, notes) == [(13, 10)]
    assert len(notes) == 1 and "rounded to 13" in notes[0]


def test_coupling_checks():
    with pytest.raises(ArgumentError):
        Coupling(CouplingKind.FIX_H, fixed=0.01, drive="h")
    with pytest.raises(ArgumentError):
        Coupling(CouplingKind.FIX_TAU, drive="h")
    with pytest.raises(ArgumentError):
        Coupling(CouplingKind.TAU_LINEAR, constant=-1.0)
    with pytest.raises(ArgumentError):
        resolve_levels(Coupling(CouplingKind.TAU_LINEAR), [], 1.0, 1.0)


def test_single_level_has_no_orders():
    report = run_study(SchemeType.COMPACT, make_test2(1.0, 0.5),
                       Coupling(CouplingKind.FIX_H, fixed=1 / 20), ["1/10"])
    assert len(report.levels) == 1
    level = report.levels[0]
    assert level.err_l2 is not None and level.co_l2 is None and level.co_max is None
    assert level.stability_ratio <= 1.0


def test_self_convergence_without_exact_solution():
    report = run_study(SchemeType.SECOND_ORDER, get_unforced_problem(),
                       Coupling(CouplingKind.TAU_LINEAR), ["1/8", "1/16", "1/32"], jobs=2)
    assert report.metadata["error_kind"] == "self-convergence"
    assert report.levels[0].err_l2 > report.levels[1].err_l2 > 0
    assert report.levels[-1].err_l2 is None
    assert report.levels[1].co_l2 > 1.5


def test_self_convergence_needs_nested_levels():
    with pytest.raises(StudyError, match="nested"):
        run_study(SchemeType.SECOND_ORDER, get_unforced_problem(),
                  Coupling(CouplingKind.TAU_LINEAR), ["1/8", "1/12"])


def test_failed_level_carries_partial_report(monkeypatch):
    def flaky(problem, N, M, keep_tables=False):
        if N == 16:
            raise NumericalError("pivot")
        return solve(problem, N, M, keep_tables=keep_tables)

    monkeypatch.setitem(analysis.SOLVERS, SchemeType.SECOND_ORDER, flaky)
    with pytest.raises(StudyError) as excinfo:
        run_study(SchemeType.SECOND_ORDER, make_test2(1.0, 0.5),
                  Coupling(CouplingKind.TAU_LINEAR), ["1/8", "1/16"])
    partial = excinfo.value.partial_report
    assert partial.levels[0].err_l2 is not None
    assert partial.levels[1].err_l2 is None
    assert excinfo.value.level == {"index": 1, "N": 16, "M": 16}


def test_table3_first_levels():
    report = run_preset("table3", max_levels=2, blocks=[1])[0]
    reference = PRESETS["table3"].blocks[1].reference_l2
    for level, expected in zip(report.levels, reference):
        assert get_relative_deviation(level.err_l2, expected) < 0.05, (level.err_l2, expected)
    assert 1.98 <= report.levels[1].co_l2 <= 2.05
    assert all(level.stability_ratio <= 1.0 for level in report.levels)


def test_table4_first_block():
    report = run_preset("table4", blocks=[0])[0]
    assert [(level.N, level.M) for level in report.levels] == [(N, 2000) for N in (4, 8, 16, 32)]
    assert "1/2000" in report.metadata["notes"][0]
    reference = PRESETS["table4"].blocks[0].reference_l2
    for level, expected in zip(report.levels, reference):
        assert get_relative_deviation(level.err_l2, expected) < 0.05, (level.err_l2, expected)
    for level in report.levels[1:]:
        assert 3.9 <= level.co_l2 <= 4.1
    assert report.drive == "h"


def test_table1_first_levels():
    for report in run_preset("table1", max_levels=3):
        for level in report.levels[1:]:
            assert 1.95 <= level.co_l2 <= 2.16, report.to_dict()
            assert 1.95 <= level.co_max <= 2.16, report.to_dict()
        assert all(level.stability_ratio <= 1.0 for level in report.levels)
        assert report.metadata["notes"]


@pytest.mark.slow
@pytest.mark.parametrize("name", ["table1", "table3", "table4"])
def test_full_tables(name):
    low, high = {"table1": (1.95, 2.16), "table3": (1.98, 2.05), "table4": (3.9, 4.1)}[name]
    for report in run_preset(name, jobs=2):
        for level in report.levels[1:]:
            assert low <= level.co_l2 <= high
            assert low <= level.co_max <= high
        assert all(level.stability_ratio <= 1.0 for level in report.levels)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["table2", "table5"])
def test_order_only_tables(name):
    for report in run_preset(name, jobs=2):
        assert report.metadata["co_only"]
        for level in report.levels[1:]:
            assert 1.7 <= level.co_l2 <= 2.4


def test_unknown_preset():
    with pytest.raises(ArgumentError):
        run_preset("table9")


def test_stability_audit_needs_complete_run():
    problem = make_test2(1.0, 0.5)
    grid = SpatialGrid(1.0, 4)
    history = SolutionHistory(grid, 0.5, 2, np.sin(np.pi * grid.nodes))
    with pytest.raises(ArgumentError):
        stability_audit(history, problem)


def test_writers(tmp_path):
    report = run_study(SchemeType.SECOND_ORDER, make_test2(2.0, 0.5),
                       Coupling(CouplingKind.TAU_LINEAR), ["1/4", "1/8"],
                       reference=[1e-3, 2.5e-4], metadata={"notes": ["a recorded note"]})

    lines = render_csv([report]).splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 3
    assert lines[1].startswith("second-order,2.00000e+00,5.00000e-01,4,4,")

    markdown = render_markdown([report])
    assert "ref ||z^n||_0" in markdown
    assert "- a recorded note" in markdown

    text = render_reports([report], "json")
    assert text == render_reports([report], "json")
    payload = json.loads(text)
    assert payload[0]["levels"][1]["co_l2"] is not None
    with pytest.raises(ArgumentError):
        render_reports([report], "xml")

    path = write_output(text, tmp_path / "nested" / "dir", "study", "json")
    assert path.read_text(encoding="utf-8") == text


def test_float_formatting():
    assert format_float(None) == ""
    assert format_float(1.383726e-4) == "1.38373e-04"
    assert round_floats({"a": [1.23456789, math.inf], "b": 3}) == {"a": [1.23457, "inf"], "b": 3}
    assert render_json({"b": 1.0, "a": 0.1234567}) == '{\n  "a": 0.123457,\n  "b": 1.0\n}\n'


def test_stored_orders_match_recomputation():
    report = run_study(SchemeType.SECOND_ORDER, make_test1(1.0, 0.9),
                       Coupling(CouplingKind.TAU_LINEAR, constant=3.0), ["1/4", "1/8", "1/16"])
    for previous, level in zip(report.levels, report.levels[1:]):
        assert level.co_l2 == convergence_order(previous.err_l2, level.err_l2,
                                                previous.tau, level.tau)
        assert level.co_max == convergence_order(previous.err_max, level.err_max,
                                                 previous.tau, level.tau)
        assert level.err_max >= 0 and level.err_l2 >= 0


def test_errors_vanish_against_own_output():
    problem = make_test2(1.0, 0.5)
    history = solve(problem, 8, 8)
    z = history.layers - history.layers
    assert analysis.error_norms(z, history.grid.h) == (0.0, 0.0)
