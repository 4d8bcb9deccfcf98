"""Structured JSON logging for fastskip.

Usage:
    from fastskip.core.logging import setup_logging

    setup_logging(level="INFO", json_format=True)

    import logging
    logger = logging.getLogger("fastskip")
    logger.info("train_step", extra={"step": 100, "transducer_loss": 3.2})
"""

import json
import logging
import os
import sys
from typing import Optional, TextIO

LEVEL_ENV_VAR = "FASTSKIP_LOG_LEVEL"
JSON_ENV_VAR = "FASTSKIP_LOG_JSON"

_RESERVED = frozenset(
    {
        "name",
        "msg",
        "args",
        "created",
        "filename",
        "funcName",
        "levelname",
        "levelno",
        "lineno",
        "module",
        "msecs",
        "pathname",
        "process",
        "processName",
        "relativeCreated",
        "stack_info",
        "exc_info",
        "exc_text",
        "thread",
        "threadName",
        "message",
        "taskName",
    }
)


class JSONFormatter(logging.Formatter):
    """One JSON object per record; ``extra=`` fields become top-level keys."""

    def format(self, record: logging.LogRecord) -> str:
        log_data = {
            "ts": record.created,
            "level": record.levelname,
            "logger": record.name,
            "msg": record.getMessage(),
        }

        for key, value in record.__dict__.items():
            if key in _RESERVED:
                continue
            try:
                json.dumps(value)
                log_data[key] = value
            except (TypeError, ValueError):
                log_data[key] = str(value)

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, default=str)


def setup_logging(
    level: Optional[str] = None,
    json_format: Optional[bool] = None,
    logger_name: str = "fastskip",
    stream: Optional[TextIO] = None,
) -> logging.Logger:
    """Configure structured logging.

    Args:
        level: DEBUG, INFO, WARNING, ERROR (default ``$FASTSKIP_LOG_LEVEL`` or INFO)
        json_format: True for JSON (default ``$FASTSKIP_LOG_JSON``, else True)
        logger_name: Logger name
        stream: Destination (default stderr, keeping stdout for command output)
    """
    if level is None:
        level = os.environ.get(LEVEL_ENV_VAR, "INFO")
    if json_format is None:
        json_format = os.environ.get(JSON_ENV_VAR, "1").lower() in ("1", "true", "yes")

    logger = logging.getLogger(logger_name)
    logger.setLevel(getattr(logging, level.upper()))
    logger.handlers.clear()

    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setLevel(getattr(logging, level.upper()))

    if json_format:
        handler.setFormatter(JSONFormatter())
    else:
        handler.setFormatter(
            logging.Formatter("%(asctime)s [%(levelname)s] %(name)s: %(message)s")
        )

    logger.addHandler(handler)
    logger.propagate = False
    return logger


def get_logger(name: str = "fastskip") -> logging.Logger:
    """Get logger instance."""
    return logging.getLogger(name)
