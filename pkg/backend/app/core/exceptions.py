from typing import Optional

from pydantic import ValidationError

from app.core.logging import logger


class WelfareOrderError(Exception):
    """Base error; `exit_code` is what the CLI returns for it."""

    exit_code = 4


class ConfigError(WelfareOrderError):
    exit_code = 2


class BudgetExceededError(WelfareOrderError):
    exit_code = 3


class DomainError(WelfareOrderError, ValueError):
    """An input outside the domain of an operation (|x| > 1, zero norms, ...)."""


class QuadratureError(WelfareOrderError):
    """Quadrature did not reach the requested tolerance.

    The best estimate and its error bound are attached so callers may still
    decide to use them.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


def config_error_from_validation(exc: ValidationError, prefix: Optional[str] = None) -> ConfigError:
    """Flatten a pydantic ValidationError into a ConfigError with field paths."""
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err.get("loc", ()))
        if prefix:
            loc = f"{prefix}.{loc}" if loc else prefix
        lines.append(f"{loc or '<root>'}: {err.get('msg')}")
    return ConfigError("invalid configuration:\n  " + "\n  ".join(lines))


def handle_exception(exc: BaseException) -> int:
    if isinstance(exc, ValidationError):
        exc = config_error_from_validation(exc)
    if isinstance(exc, WelfareOrderError):
        logger.error(str(exc), extra={"event": "command", "status": "error", "error_type": type(exc).__name__})
        return exc.exit_code
    logger.exception("Unhandled error", extra={"event": "command", "status": "error"})
    return 4
