"""Logging configuration for nevo_gspt."""

import logging
import sys
from pathlib import Path
from typing import Optional
from logging.handlers import RotatingFileHandler

from config.settings import settings

CONSOLE_FORMAT = '%(asctime)s | %(name)s | %(levelname)s | %(message)s'
FILE_FORMAT = '%(asctime)s | %(name)s | %(levelname)s | %(funcName)s:%(lineno)d | %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def setup_logger(
    name: str,
    log_file: Optional[str] = None,
    level: Optional[str] = None,
    console: bool = True
) -> logging.Logger:
    """Set up a logger with console and file handlers.

    Args:
        name: Name of the logger (component or experiment name)
        log_file: Optional log file name (created in LOG_DIR)
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        console: Attach a stdout handler; worker processes turn this off

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    log_level = getattr(logging, (level or settings.LOG_LEVEL).upper())
    logger.setLevel(log_level)

    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    if console:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(log_level)
        console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt=DATE_FORMAT))
        logger.addHandler(console_handler)

    if log_file:
        log_dir = Path(settings.LOG_DIR)
        log_dir.mkdir(parents=True, exist_ok=True)

        file_handler = RotatingFileHandler(
            log_dir / log_file,
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setLevel(log_level)
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
        logger.addHandler(file_handler)

    return logger


def get_logger(name: str) -> logging.Logger:
    """Get a component logger by name.

    Component loggers carry no handlers of their own; records reach whatever
    the application configured (the manager's console/file handlers, or
    pytest's capture).

    Args:
        name: Name of the logger

    Returns:
        Logger instance
    """
    return logging.getLogger(name)


def log_banner(logger: logging.Logger, title: str, width: int = 80) -> None:
    """Log a section banner framed by rules."""
    logger.info("=" * width)
    logger.info(title)
    logger.info("=" * width)
