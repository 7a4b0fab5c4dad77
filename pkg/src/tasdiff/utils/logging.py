"""Logging configuration and utilities.

structlog builds the event dicts; stdlib handlers on the root logger render them.
Console output goes to stderr so command results on stdout stay parseable.
"""

import functools
import logging
import logging.handlers
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import colorlog
import structlog
from colorlog.escape_codes import parse_colors
from structlog.typing import Processor


LEVEL_COLORS: Dict[str, str] = {
    "debug": "cyan",
    "info": "green",
    "warning": "yellow",
    "error": "red",
    "critical": "red,bg_white",
}

LOG_FILE_MAX_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 5

# Marks handlers owned by setup_logging so a second call can replace them.
_HANDLER_MARK = "_tasdiff_handler"


def _shared_processors() -> List[Processor]:
    return [
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
    ]


def _level_styles() -> Dict[str, str]:
    styles = {level: parse_colors(colors) for level, colors in LEVEL_COLORS.items()}
    styles["exception"] = styles["error"]
    return styles


def _formatter(renderer: Processor) -> structlog.stdlib.ProcessorFormatter:
    # foreign_pre_chain handles records from plain stdlib loggers (matplotlib etc.)
    return structlog.stdlib.ProcessorFormatter(
        foreign_pre_chain=_shared_processors(),
        processors=[structlog.stdlib.ProcessorFormatter.remove_processors_meta, renderer],
    )


def _install(handler: logging.Handler, level: int) -> None:
    handler.setLevel(level)
    setattr(handler, _HANDLER_MARK, True)
    logging.getLogger().addHandler(handler)


def setup_logging(
    log_level: Optional[str] = None,
    log_format: Optional[str] = None,
    log_file: Optional[str] = None
) -> None:
    """Set up logging configuration.

    Safe to call more than once: handlers installed by an earlier call are replaced.
    """
    level = getattr(logging, (log_level or "INFO").upper())

    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, _HANDLER_MARK, False):
            root.removeHandler(handler)
            handler.close()
    root.setLevel(level)

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            *_shared_processors(),
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )

    setup_console_logging(level, log_format or "console")
    if log_file:
        setup_file_logging(log_file, level)


def setup_file_logging(file_path: str, level: int) -> None:
    """Append JSON lines to a rotating log file."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)

    handler = logging.handlers.RotatingFileHandler(path, maxBytes=LOG_FILE_MAX_BYTES, backupCount=LOG_FILE_BACKUPS)
    handler.setFormatter(_formatter(structlog.processors.JSONRenderer()))
    _install(handler, level)


def setup_console_logging(level: int, log_format: str = "console") -> None:
    """Colored key/value lines on stderr, or JSON lines when log_format is 'json'."""
    handler = colorlog.StreamHandler(sys.stderr)
    if log_format == "json":
        renderer: Processor = structlog.processors.JSONRenderer()
    else:
        colors = sys.stderr.isatty()
        renderer = structlog.dev.ConsoleRenderer(colors=colors, level_styles=_level_styles() if colors else None)
    handler.setFormatter(_formatter(renderer))
    _install(handler, level)


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """Get a structured logger instance."""
    return structlog.get_logger(name)


class LoggerMixin:
    """Mixin class to add logging capabilities to any class."""

    @property
    def logger(self) -> structlog.stdlib.BoundLogger:
        return get_logger(self.__class__.__name__)


def log_execution_time(func):
    """Log the wall time of a pipeline command, and whether it raised."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = get_logger(func.__qualname__)
        started = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            logger.error("Command failed", command=func.__name__,
                         seconds=round(time.perf_counter() - started, 4), error=str(e))
            raise
        logger.info("Command finished", command=func.__name__, seconds=round(time.perf_counter() - started, 4))
        return result

    return wrapper
