"""Unit tests for environment-driven runtime settings.

PATIENTCODE_LOG_LEVEL selects the package log level; unset, empty or
unknown values fall back to INFO, the unknown case with a warning.
"""

import logging

import pytest

from patientcode import settings


@pytest.fixture(autouse=True)
def clear_env(monkeypatch):
    """Start every test without a configured level."""
    monkeypatch.delenv(settings.LOG_LEVEL_VARIABLE, raising=False)


def test_unset_variable_defaults_to_info():
    """Test INFO is used when the variable is absent."""
    assert settings.get_log_level_name() == "INFO"


@pytest.mark.parametrize("raw,expected", [("debug", "DEBUG"), ("WARNING", "WARNING"), (" error ", "ERROR")])
def test_known_levels_any_case(monkeypatch, raw, expected):
    """Test level names are accepted in any case and with surrounding spaces."""
    monkeypatch.setenv(settings.LOG_LEVEL_VARIABLE, raw)
    assert settings.get_log_level_name() == expected


def test_unknown_level_falls_back_with_warning(monkeypatch, caplog):
    """Test an unknown value falls back to INFO and says so."""
    monkeypatch.setenv(settings.LOG_LEVEL_VARIABLE, "verbose")
    assert settings.get_log_level_name() == "INFO"
    assert "not a known level" in caplog.text


def test_empty_value_is_treated_as_unset(monkeypatch):
    """Test a blank variable falls back silently."""
    monkeypatch.setenv(settings.LOG_LEVEL_VARIABLE, "  ")
    assert settings.get_log_level_name() == "INFO"


def test_configure_logging_sets_level_and_one_handler(monkeypatch):
    """Test repeated configuration keeps a single package handler."""
    monkeypatch.setenv(settings.LOG_LEVEL_VARIABLE, "debug")
    assert settings.configure_logging() == logging.DEBUG
    settings.configure_logging()
    handlers = [h for h in settings.logger.handlers if h.get_name() == settings.HANDLER_NAME]
    assert len(handlers) == 1
    assert settings.logger.level == logging.DEBUG
    monkeypatch.setenv(settings.LOG_LEVEL_VARIABLE, "info")
    settings.configure_logging()
    assert settings.logger.level == logging.INFO
