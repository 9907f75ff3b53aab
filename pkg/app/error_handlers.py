"""Error handlers for purestate commands"""

import json
import logging
import sys

from pydantic import ValidationError

from app.exceptions import PureStateException
from app.routers.base import Invocation

logger = logging.getLogger(__name__)


def _emit(invocation: Invocation, message: str, details, error_type: str) -> None:
    document = {
        "error": {
            "message": message,
            "details": details,
            "type": error_type
        },
        "run_id": getattr(invocation.state, "run_id", None)
    }
    print(json.dumps(document, default=str), file=sys.stderr)


def purestate_exception_handler(invocation: Invocation, exc: PureStateException) -> int:
    """Handle the package's own exceptions"""
    logger.error(f"{exc.__class__.__name__}: {exc.message} - Details: {exc.details}")
    _emit(invocation, exc.message, exc.details, exc.__class__.__name__)
    return exc.exit_code


def validation_exception_handler(invocation: Invocation, exc: ValidationError) -> int:
    """Handle model validation errors raised outside the config loader"""
    logger.error(f"ValidationError: {exc.errors()}")
    _emit(invocation, "Validation failed", exc.errors(), "ValidationError")
    return 1


def generic_exception_handler(invocation: Invocation, exc: Exception) -> int:
    """Handle any unhandled exceptions"""
    logger.exception(f"Unhandled exception: {str(exc)}")
    _emit(invocation, "Internal error", {"exception": str(exc)}, "InternalError")
    return 2
