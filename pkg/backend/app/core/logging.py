import logging
import os
import sys

from pythonjsonlogger.json import JsonFormatter


def _json_formatter() -> logging.Formatter:
    """Structured JSON logs: ts, level, logger, message plus any `extra` context."""
    return JsonFormatter(
        "{asctime}{levelname}{name}{message}",
        style="{",
        rename_fields={"asctime": "ts", "levelname": "level", "name": "logger"},
        datefmt="%Y-%m-%dT%H:%M:%S%z",
    )


def configure_logging() -> logging.Logger:
    json_logging = os.getenv("LOG_JSON", "true").lower() in {"1", "true", "yes"}
    level = os.getenv("LOG_LEVEL", "INFO").upper()

    # stderr keeps stdout free for command reports
    handler = logging.StreamHandler(sys.stderr)
    if json_logging:
        handler.setFormatter(_json_formatter())
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s | %(levelname)s | %(name)s | %(message)s"))

    log = logging.getLogger("welfare-order")
    log.handlers[:] = [handler]
    log.setLevel(level)
    log.propagate = False
    return log


logger = configure_logging()
