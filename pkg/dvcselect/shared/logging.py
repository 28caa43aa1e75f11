"""
Shared logging utilities.

Every module logs through a child of the ``dvcselect`` logger. Records carry
a ``run`` attribute naming the experiment cell they belong to, so interleaved
lines from a benchmark grid can be told apart.
"""

import logging
import sys
from contextlib import contextmanager
from contextvars import ContextVar
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Dict, Iterator

from .exceptions import ConfigurationError
from ..infrastructure.config.settings import get_settings

ROOT_LOGGER = "dvcselect"

_run_fields: ContextVar[Dict[str, object]] = ContextVar("dvcselect_run_fields", default={})


def describe_run(fields: Dict[str, object]) -> str:
    """``method=dvc budget=0.2 seed=1`` style label, ``-`` outside any run."""
    if not fields:
        return "-"
    return " ".join(f"{key}={value}" for key, value in fields.items())


@contextmanager
def run_context(**fields: object) -> Iterator[None]:
    """Tag every record logged inside the block with ``fields``."""
    merged = {**_run_fields.get(), **fields}
    token = _run_fields.set(merged)
    try:
        yield
    finally:
        _run_fields.reset(token)


class RunContextFilter(logging.Filter):
    """Stamps ``record.run`` from the active run context."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.run = describe_run(_run_fields.get())
        return True


def setup_logging(logger_name: str = ROOT_LOGGER) -> logging.Logger:
    """
    Configure the package logger from ``LoggingSettings``.

    Console output goes to stderr unless ``logging.stream`` is ``stdout``;
    reports and JSON summaries own stdout. A rotating file handler is added
    when ``logging.file_path`` is set.

    Raises:
        ConfigurationError: if the configured level is not a logging level.
    """
    settings = get_settings().logging
    level = logging.getLevelName(settings.level.upper())
    if not isinstance(level, int):
        raise ConfigurationError(f"Unknown log level '{settings.level}'")

    logger = logging.getLogger(logger_name)
    logger.setLevel(level)
    logger.handlers.clear()

    formatter = logging.Formatter(settings.format)
    run_filter = RunContextFilter()

    stream = sys.stdout if settings.stream == "stdout" else sys.stderr
    console_handler = logging.StreamHandler(stream)
    console_handler.setFormatter(formatter)
    console_handler.addFilter(run_filter)
    logger.addHandler(console_handler)

    if settings.file_path:
        try:
            log_path = Path(settings.file_path)
            log_path.parent.mkdir(parents=True, exist_ok=True)
            file_handler = RotatingFileHandler(
                log_path,
                maxBytes=settings.max_file_size_mb * 1024 * 1024,
                backupCount=settings.backup_count,
                encoding='utf-8'
            )
            file_handler.setFormatter(formatter)
            file_handler.addFilter(run_filter)
            logger.addHandler(file_handler)
        except OSError as e:
            logger.error(f"Failed to set up file logging at {settings.file_path}: {e}")

    logger.propagate = False
    return logger


def get_logger(name: str) -> logging.Logger:
    """Logger for ``name``, placed under the package root if it is not already."""
    if name != ROOT_LOGGER and not name.startswith(ROOT_LOGGER + "."):
        name = f"{ROOT_LOGGER}.{name}"
    return logging.getLogger(name)
