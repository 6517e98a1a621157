"""Exception hierarchy shared by the simulation engines and the CLI."""

from typing import Dict, Optional, Sequence


class FluxStoqError(Exception):
    """Base exception for all simulator failures."""
    pass


class ConfigurationError(FluxStoqError):
    """Raised when a configuration document or flag set is incomplete or malformed."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class ParameterValidationError(FluxStoqError, ValueError):
    """Raised when a domain value violates one of its invariants."""

    def __init__(self, message: str, value: object = None):
        super().__init__(message)
        self.value = value


class UsageError(FluxStoqError, ValueError):
    """Raised when an operation is called outside its preconditions."""
    pass


class ModelError(FluxStoqError):
    """Raised when a discretized model cannot be constructed."""
    pass


class NumericalError(FluxStoqError):
    """Raised when a numerical method fails to reach its tolerance."""

    def __init__(self, message: str, residuals: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class TruncationError(NumericalError):
    """Raised when too few eigenpairs are retained for a thermal trace."""
    pass


class InvariantViolationError(FluxStoqError):
    """Raised when a runtime invariant fails; always an implementation bug."""

    def __init__(self, message: str, context: Optional[Dict[str, object]] = None):
        super().__init__(message)
        self.context = context or {}


class DataPersistenceError(FluxStoqError):
    """Raised when output files cannot be written or inputs cannot be read."""
    pass
