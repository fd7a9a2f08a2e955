"""Runtime settings read from the process environment.

Resolves the log verbosity for the library and the CLI:
- PATIENTCODE_LOG_LEVEL: DEBUG, INFO, WARNING or ERROR
- fallback (unset or unknown value): INFO

Lookup failures never abort a run; they fall back to the default level and
say so on the log.
"""

import logging
import os

LOG_LEVEL_VARIABLE = "PATIENTCODE_LOG_LEVEL"
DEFAULT_LOG_LEVEL = "INFO"

_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
}

_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
HANDLER_NAME = "patientcode-stream"

logger = logging.getLogger("patientcode")


def _level_from_env(env_value: str) -> int:
    """Map an environment value to a logging level.

    Args:
        env_value: Level name (debug, info, warning, error), any case.

    Returns:
        The logging level, INFO as fallback.
    """
    env_value = (env_value or "").strip().lower()
    return _LEVELS.get(env_value, logging.INFO)


def get_log_level_name() -> str:
    """Return the configured level name, falling back to INFO on bad values."""
    raw = os.environ.get(LOG_LEVEL_VARIABLE)
    if raw is None or not raw.strip():
        return DEFAULT_LOG_LEVEL
    if raw.strip().lower() not in _LEVELS:
        logger.warning("%s=%r is not a known level; falling back to %s", LOG_LEVEL_VARIABLE, raw, DEFAULT_LOG_LEVEL)
        return DEFAULT_LOG_LEVEL
    return raw.strip().upper()


def configure_logging() -> int:
    """Attach a single stream handler to the package logger.

    Safe to call more than once; the handler is installed only the first time.

    Returns:
        The effective logging level.
    """
    level = _level_from_env(get_log_level_name())
    if not any(h.get_name() == HANDLER_NAME for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.set_name(HANDLER_NAME)
        handler.setFormatter(logging.Formatter(_LOG_FORMAT))
        logger.addHandler(handler)
    logger.setLevel(level)
    return level
