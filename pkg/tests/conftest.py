"""Shared fixtures for the twinbeam test suite."""
import os

import numpy as np
import pytest

from twinbeam.models import DetectionParams


DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture
def rng():
    """Seeded generator so random parameter draws are reproducible."""
    return np.random.default_rng(20240611)


@pytest.fixture
def lab_detection():
    """Measured net detection efficiency of the twin-beam setup."""
    return DetectionParams.balanced(0.85)


@pytest.fixture
def synthetic_csv():
    return os.path.join(DATA_DIR, "synthetic_measurements.csv")


@pytest.fixture
def isolated_env(tmp_path, monkeypatch):
    """Run from an empty directory with no twinbeam environment overrides."""
    monkeypatch.chdir(tmp_path)
    for name in ("TWINBEAM_CONFIG_PATH", "TWINBEAM_ETA", "LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    return tmp_path
