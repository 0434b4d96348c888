"""Tests for settings loading and precedence."""
import pytest

from twinbeam.config import Settings, load_settings, with_overrides
from twinbeam.errors import ConfigError


def test_defaults_without_config_file(isolated_env):
    settings = load_settings()
    assert settings == Settings()
    assert settings.eta == 0.85
    assert settings.oracle_stages[-1] == 100_000
    assert settings.source is None


def test_missing_explicit_file_raises(isolated_env):
    with pytest.raises(ConfigError):
        load_settings("nowhere.yaml")


def test_missing_file_from_environment_raises(isolated_env, monkeypatch):
    monkeypatch.setenv("TWINBEAM_CONFIG_PATH", "nowhere.yaml")
    with pytest.raises(ConfigError):
        load_settings()


def test_file_values_are_applied(isolated_env):
    (isolated_env / "config.yaml").write_text(
        "detection:\n  eta: 0.9\n"
        "oracle:\n  threshold: 1.0e-3\n  stages: [100, 200]\n"
        "sweep:\n  ta_range: [0.1, 1.0, 10]\n"
        "logging:\n  level: DEBUG\n",
        encoding="utf-8",
    )
    settings = load_settings()
    assert settings.eta == 0.9
    assert settings.oracle_threshold == 1e-3
    assert settings.oracle_stages == (100, 200)
    assert settings.sweep_ta_range == (0.1, 1.0, 10)
    assert settings.log_level == "DEBUG"
    assert settings.source == "config.yaml"


def test_repository_config_matches_defaults(monkeypatch):
    import os
    monkeypatch.delenv("TWINBEAM_ETA", raising=False)
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    assert load_settings(os.path.join(root, "config.yaml")) == Settings()


def test_environment_overrides_file(isolated_env, monkeypatch):
    (isolated_env / "config.yaml").write_text("detection:\n  eta: 0.9\n", encoding="utf-8")
    monkeypatch.setenv("TWINBEAM_ETA", "0.7")
    assert load_settings().eta == 0.7


def test_flags_override_environment(isolated_env, monkeypatch):
    monkeypatch.setenv("TWINBEAM_ETA", "0.7")
    settings = with_overrides(load_settings(), eta=0.95, max_stages=None)
    assert settings.eta == 0.95
    assert settings.max_stages == Settings().max_stages


@pytest.mark.parametrize("body", [
    "detection:\n  eta: 1.5\n",
    "detection:\n  eta: fast\n",
    "oracle:\n  stages: [200, 100]\n",
    "sweep:\n  gain_range: [1.0, 6.0, 1]\n",
    "sweep:\n  ta_range: [0.0, 1.0, 10]\n",
    "compare:\n  t_range: [0.3, 1.0]\n",
    "- just\n- a list\n",
    "detection: [unclosed\n",
])
def test_invalid_values_raise(isolated_env, body):
    (isolated_env / "config.yaml").write_text(body, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_settings()


def test_invalid_environment_eta(isolated_env, monkeypatch):
    monkeypatch.setenv("TWINBEAM_ETA", "high")
    with pytest.raises(ConfigError):
        load_settings()
