"""Logging configuration for partisketch."""

import logging
import sys
from pathlib import Path

from .config import Config


def setup_logging(level: str | None = None, log_file: str | None = None) -> logging.Logger:
    """Set up logging for the whole process.

    Diagnostics go to stderr so that estimates and reports written to stdout stay clean.

    Args:
        level: Log level name; falls back to the configured ``logging.level``
        log_file: Optional extra log file; falls back to the configured ``logging.file``

    Returns:
        The module logger
    """
    config = Config()
    level_name = (level or config.LOG_LEVEL).upper()
    log_file = log_file if log_file is not None else config.LOG_FILE

    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=config.LOG_FORMAT,
        datefmt=config.LOG_DATE_FORMAT,
        handlers=handlers,
        force=True,
    )

    logger = logging.getLogger(__name__)
    logger.debug(f'Logging configured at {level_name}')
    return logger
