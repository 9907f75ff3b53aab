"""Custom exceptions for purestate"""

from typing import Optional, Dict, Any


class PureStateException(Exception):
    """Base exception for purestate"""

    def __init__(self, message: str, exit_code: int = 2, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class PureStateValidationError(PureStateException):
    """Raised when an input fails validation"""

    def __init__(self, message: str = "Input validation failed", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=1, details=details)


class ConfigError(PureStateValidationError):
    """Raised when the run configuration cannot be parsed or is inconsistent"""

    def __init__(self, message: str = "Invalid configuration", section: Optional[str] = None,
                 key: Optional[str] = None, line: Optional[int] = None,
                 details: Optional[Dict[str, Any]] = None):
        details = dict(details or {})
        details.update({k: v for k, v in (("section", section), ("key", key), ("line", line)) if v is not None})
        where = ""
        if section is not None:
            where = f" [{section}]"
            if key is not None:
                where += f" {key}"
            if line is not None:
                where += f" (line {line})"
        super().__init__(f"{message}{where}", details=details)


class InvalidIndexError(PureStateValidationError):
    """Raised when a subsystem, level or basis index is out of range"""

    def __init__(self, message: str = "Index out of range", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details=details)


class DimensionError(PureStateValidationError):
    """Raised when array dimensions are inconsistent or above a configured cap"""

    def __init__(self, message: str = "Dimension mismatch", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details=details)


class StateValidationError(PureStateValidationError):
    """Raised when a matrix is not Hermitian, not unitary, or not a valid state"""

    def __init__(self, message: str = "Invalid state", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details=details)


class UndersamplingError(PureStateValidationError):
    """Raised when a sample rate cannot resolve the highest lab-frame carrier"""

    def __init__(self, message: str = "Sample rate too low", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details=details)


class NumericalError(PureStateException):
    """Raised when a numerical computation fails"""

    def __init__(self, message: str = "Numerical failure", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=2, details=details)


class PropagationError(NumericalError):
    """Raised when a time step cannot be completed"""

    def __init__(self, message: str = "Propagation failed", step: Optional[int] = None,
                 details: Optional[Dict[str, Any]] = None):
        details = dict(details or {})
        if step is not None:
            details["step"] = step
            message = f"{message} at step {step}"
        super().__init__(message, details=details)


class AdjointSolveError(NumericalError):
    """Raised when the backward sweep cannot be completed"""

    def __init__(self, message: str = "Adjoint solve failed", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details=details)


class CheckFailedError(NumericalError):
    """Raised when a verification check exceeds its tolerance"""

    def __init__(self, message: str = "Check failed", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details=details)
