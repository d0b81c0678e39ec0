import json

import pytest
import yaml

from fracstep.config import DEFAULT_CONFIG, FracstepConfig, get_config


def get_sample_settings():
    return {
        "oracle": {"tol": 1e-8, "min_slope": 1.8},
        "properties": {"alphas": [0.25], "max_level": 32},
        "processing": {"jobs": 4, "colour": "blue"},
        "unknown_section": {"a": 1},
    }


def test_defaults_validate():
    assert DEFAULT_CONFIG.validate()
    assert DEFAULT_CONFIG.processing.jobs == 1
    assert DEFAULT_CONFIG.properties.max_level == 512


def test_from_dict_ignores_unknown_keys():
    config = FracstepConfig.from_dict(get_sample_settings())
    assert config.oracle.tol == 1e-8
    assert config.oracle.min_slope == 1.8
    assert config.properties.alphas == [0.25]
    assert config.processing.jobs == 4
    assert not hasattr(config.processing, "colour")
    assert config.to_dict()["properties"]["max_level"] == 32


@pytest.mark.parametrize("section,key,value", [
    ("coefficients", "cancellation_tol", 0.0),
    ("oracle", "tol", -1.0),
    ("properties", "alphas", [0.5, 1.0]),
    ("properties", "decay_rates", [-1.0]),
    ("properties", "max_level", 1),
    ("processing", "jobs", 0),
    ("processing", "significant_digits", 20),
])
def test_validate_rejects(section, key, value):
    config = FracstepConfig.from_dict({section: {key: value}})
    with pytest.raises(ValueError):
        config.validate()


def test_from_env(monkeypatch):
    monkeypatch.setenv("FRACSTEP_JOBS", "6")
    monkeypatch.setenv("FRACSTEP_LOG_LEVEL", "debug")
    monkeypatch.setenv("FRACSTEP_ORACLE_TOL", "1e-9")
    config = FracstepConfig.from_env()
    assert config.processing.jobs == 6
    assert config.processing.log_level == "DEBUG"
    assert config.oracle.tol == 1e-9


@pytest.mark.parametrize("suffix", ["json", "yaml"])
def test_from_file(tmp_path, suffix):
    path = tmp_path / f"settings.{suffix}"
    dump = json.dumps if suffix == "json" else yaml.safe_dump
    path.write_text(dump(get_sample_settings()), encoding="utf-8")
    config = FracstepConfig.from_file(str(path))
    assert config.processing.jobs == 4


def test_from_file_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        FracstepConfig.from_file(str(tmp_path / "absent.json"))
    path = tmp_path / "settings.toml"
    path.write_text("", encoding="utf-8")
    with pytest.raises(ValueError):
        FracstepConfig.from_file(str(path))


def test_get_config_prefers_file(tmp_path, monkeypatch):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps({"processing": {"output_dir": "out"}}), encoding="utf-8")
    monkeypatch.setenv("FRACSTEP_CONFIG_FILE", str(path))
    monkeypatch.setenv("FRACSTEP_OUTPUT_DIR", "ignored")
    assert get_config().processing.output_dir == "out"


def test_get_config_falls_back_to_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACSTEP_CONFIG_FILE", str(tmp_path / "absent.yaml"))
    monkeypatch.setenv("FRACSTEP_OUTPUT_DIR", "from-env")
    assert get_config().processing.output_dir == "from-env"


def test_from_env_rejects_malformed_jobs(monkeypatch):
    monkeypatch.setenv("FRACSTEP_JOBS", "abc")
    with pytest.raises(ValueError, match="FRACSTEP_JOBS"):
        FracstepConfig.from_env()


def test_from_file_rejects_malformed_yaml(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("processing: [jobs: 2", encoding="utf-8")
    with pytest.raises(ValueError, match="Invalid YAML"):
        FracstepConfig.from_file(str(path))
