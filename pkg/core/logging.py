"""Logging setup: one loguru stderr sink plus an optional rotating file."""

import sys
from loguru import logger

from core.config import LOG_LEVEL, LOG_FILE

_FORMAT = "<green>{time:HH:mm:ss.SSS}</green> | <level>{level: <7}</level> | {message}"


def setup_logging(level: str | None = None, log_file: str | None = None) -> None:
    """(Re)install the sinks. Safe to call more than once."""
    logger.remove()
    logger.add(sys.stderr, level=(level or LOG_LEVEL).upper(), format=_FORMAT)
    path = log_file or LOG_FILE
    if path:
        logger.add(path, level="DEBUG", rotation="10 MB", compression="zip", enqueue=True)
