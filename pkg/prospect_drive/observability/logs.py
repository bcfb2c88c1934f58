"""
Prospect Drive - Structured logging
JSON log lines on stderr, one event per line.
"""

import logging
import os
import sys
from typing import Optional

import structlog

DEFAULT_LEVEL = "INFO"


def _stderr_logger(*_args) -> structlog.PrintLogger:
    """Logger on whatever sys.stderr is at the time of the call"""
    return structlog.PrintLogger(file=sys.stderr)


def configure_logging(level: Optional[str] = None, json_output: bool = True) -> None:
    """
    Configure structlog for the process.

    Level falls back to PROSPECT_DRIVE_LOG_LEVEL, then INFO. Console rendering is available
    for interactive use; the CLI always emits JSON.

    Loggers are not cached and resolve sys.stderr per call, so a redirected or replaced
    stream is picked up.
    """
    level_name = (level or os.getenv("PROSPECT_DRIVE_LOG_LEVEL") or DEFAULT_LEVEL).upper()
    numeric_level = getattr(logging, level_name, logging.INFO)

    renderer = structlog.processors.JSONRenderer() if json_output else structlog.dev.ConsoleRenderer()
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric_level),
        logger_factory=_stderr_logger,
        cache_logger_on_first_use=False,
    )
