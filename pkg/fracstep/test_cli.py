import json

import pytest

from fracstep.cli import RunConfig, RunContext, build_parser, load_run_config, main
from fracstep.config import get_config
from fracstep.exceptions import ConfigError

SMALL_PROPERTIES = {"alphas": [0.5], "decay_rates": [0.0, 1.0], "max_level": 32,
                    "random_cases": 20, "max_series_len": 16}


def get_config_file(tmp_path, name="run.json", **fields):
    path = tmp_path / name
    path.write_text(json.dumps({"schema_version": 1, **fields}), encoding="utf-8")
    return str(path)


def test_solve_writes_solution_and_summary(tmp_path):
    config = get_config_file(tmp_path, problem={"problem": "test2", "b": 2.0, "alpha": 0.5},
                             scheme="compact", N=20, M=20)
    output = tmp_path / "missing" / "out"
    assert main(["solve", "--config", config, "--output", str(output)]) == 0

    lines = (output / "solve_test2.csv").read_text().splitlines()
    assert lines[0] == "x,y,u"
    assert len(lines) == 22
    summary = json.loads((output / "solve_test2_summary.json").read_text())
    assert summary["stability"]["passed"]
    assert summary["errors"]["err_l2"] < 1e-2


def test_compact_solve_of_x_dependent_problem_fails(tmp_path):
    config = get_config_file(tmp_path, problem={"problem": "test1", "b": 1.0, "alpha": 0.5},
                             scheme="compact", N=10, M=10)
    assert main(["solve", "--config", config, "--output", str(tmp_path)]) == 1


@pytest.mark.parametrize("fields", [
    {"schema_version": 2},
    {"unknown_key": 1},
    {"scheme": "spectral"},
    {"N": 1},
])
def test_schema_errors_exit_2(tmp_path, fields):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(fields), encoding="utf-8")
    assert main(["solve", "--config", str(path), "--output", str(tmp_path)]) == 2


def test_missing_config_and_missing_fields_exit_2(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.json")]) == 2
    config = get_config_file(tmp_path, problem={"problem": "test2", "b": 1.0, "alpha": 0.5})
    assert main(["solve", "--config", config, "--output", str(tmp_path)]) == 2


def test_command_mismatch_exit_2(tmp_path):
    config = get_config_file(tmp_path, command="verify")
    assert main(["oracle", "--config", config, "--output", str(tmp_path)]) == 2


def test_verify_is_byte_identical(tmp_path):
    config = get_config_file(tmp_path, properties=SMALL_PROPERTIES)
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", config, "--output", str(first), "--seed", "5"]) == 0
    assert main(["verify", "--config", config, "--output", str(second), "--seed", "5",
                 "--jobs", "2"]) == 0
    text = (first / "verify.json").read_text()
    assert text == (second / "verify.json").read_text()
    payload = json.loads(text)
    assert payload["passed"] and payload["settings"]["seed"] == 5


def test_study_single_level_markdown(tmp_path):
    config = get_config_file(
        tmp_path, problem={"problem": "test2", "b": 1.0, "alpha": 0.9}, scheme="compact",
        coupling={"kind": "fix-h-refine-tau", "fixed": "1/16"}, levels=["1/10"])
    assert main(["study", "--config", config, "--output", str(tmp_path),
                 "--format", "markdown"]) == 0
    text = (tmp_path / "study_test2.md").read_text()
    assert "| N | M |" in text


def test_study_preset_csv(tmp_path):
    config = get_config_file(tmp_path, max_levels=2, blocks=[0])
    assert main(["study", "--preset", "table4", "--config", config,
                 "--output", str(tmp_path)]) == 0
    lines = (tmp_path / "table4.csv").read_text().splitlines()
    assert lines[0].startswith("scheme,b,alpha,N,M")
    assert len(lines) == 3


def test_study_with_non_integer_grid_fails(tmp_path):
    config = get_config_file(
        tmp_path, problem={"problem": "test2", "b": 1.0, "alpha": 0.5},
        coupling={"kind": "couple-tau-h2", "constant": 16.0}, levels=["1/10"])
    assert main(["study", "--config", config, "--output", str(tmp_path)]) == 1


def test_oracle_exact_case_passes(tmp_path):
    config = get_config_file(tmp_path, oracle={"function": "t", "weight": {"name": "const"},
                                               "steps": [5, 10, 20]})
    assert main(["oracle", "--config", config, "--output", str(tmp_path),
                 "--format", "json"]) == 0
    results = json.loads((tmp_path / "oracle_t.json").read_text())
    assert results[0]["exact"] and results[0]["passed"]


def test_oracle_cubic_passes(tmp_path):
    config = get_config_file(tmp_path, oracle={"function": "t3", "alphas": [0.1],
                                               "weight": {"name": "exp", "b": 1.0},
                                               "steps": [20, 40, 80, 160]})
    assert main(["oracle", "--config", config, "--output", str(tmp_path)]) == 0
    assert (tmp_path / "oracle_t3.csv").read_text().startswith("alpha,M,error,slope")


def test_jobs_fall_back_to_environment(monkeypatch):
    monkeypatch.setenv("FRACSTEP_JOBS", "3")
    args = build_parser().parse_args(["verify"])
    assert RunContext(args, RunConfig(), get_config()).jobs == 3
    args = build_parser().parse_args(["verify", "--jobs", "2"])
    assert RunContext(args, RunConfig(), get_config()).jobs == 2


def test_load_run_config_defaults_and_errors(tmp_path):
    assert load_run_config(None).schema_version == 1
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(str(path))


def test_oracle_below_minimum_slope_fails(tmp_path):
    # t^2 with a fast-decaying weight is still pre-asymptotic at M = 160
    config = get_config_file(tmp_path, oracle={"function": "t2", "alphas": [0.9],
                                               "weight": {"name": "exp", "b": 3.0},
                                               "steps": [20, 40, 80, 160]})
    assert main(["oracle", "--config", config, "--output", str(tmp_path),
                 "--format", "json"]) == 1
    results = json.loads((tmp_path / "oracle_t2.json").read_text())
    assert not results[0]["passed"] and 1.7 < results[0]["slopes"][-1] < 1.9


@pytest.mark.parametrize("name,value", [("FRACSTEP_JOBS", "abc"), ("FRACSTEP_JOBS", "0"),
                                        ("FRACSTEP_ORACLE_TOL", "tiny")])
def test_malformed_environment_exit_2(tmp_path, monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    assert main(["verify", "--output", str(tmp_path)]) == 2
    assert not (tmp_path / "verify.json").exists()
