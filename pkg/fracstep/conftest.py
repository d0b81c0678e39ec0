import pytest

from fracstep.config import PropertyConfig
from fracstep.weights import clear_coefficient_cache


@pytest.fixture
def fresh_coefficients():
    """Empty the per-alpha a/b cache before and after the test."""
    clear_coefficient_cache()
    yield
    clear_coefficient_cache()


@pytest.fixture
def small_properties():
    return PropertyConfig(
        alphas=[0.3, 0.7],
        decay_rates=[0.0, 2.0],
        max_level=64,
        random_cases=40,
        max_series_len=24,
        seed=11,
    )


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("FRACSTEP_JOBS", "FRACSTEP_LOG_LEVEL", "FRACSTEP_OUTPUT_DIR",
                 "FRACSTEP_ORACLE_TOL", "FRACSTEP_CONFIG_FILE"):
        monkeypatch.delenv(name, raising=False)
