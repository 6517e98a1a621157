"""Classification of run failures into exit codes and single-line reports."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional

from .errors import (
    ConfigurationError,
    DataPersistenceError,
    InvariantViolationError,
    ModelError,
    NumericalError,
    ParameterValidationError,
    TruncationError,
    UsageError,
)


logger = logging.getLogger(__name__)


class ErrorCategory(Enum):
    """Failure categories with the process exit code each one maps to."""
    CONFIGURATION = ("configuration", 2)
    NUMERICAL = ("numerical", 3)
    INVARIANT = ("invariant", 4)
    SYSTEM = ("system", 1)

    def __init__(self, key: str, exit_code: int):
        self.key = key
        self.exit_code = exit_code

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class RunFailure:
    """A classified failure ready to be reported on stderr."""

    category: ErrorCategory
    error_type: str
    message: str
    suggested_actions: List[str]

    @property
    def exit_code(self) -> int:
        return self.category.exit_code

    def summary_line(self) -> str:
        text = self.message.replace('"', "'").replace("\n", " ")
        return (f'error category={self.category} code={self.exit_code} '
                f'type={self.error_type} message="{text}"')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'category': str(self.category),
            'exit_code': self.exit_code,
            'type': self.error_type,
            'message': self.message,
            'suggested_actions': list(self.suggested_actions),
        }


class ErrorHandler:
    """Maps exceptions raised during a run onto categories and advice."""

    # Checked in order; subclasses must precede their bases.
    CATEGORY_MAP = (
        (ConfigurationError, ErrorCategory.CONFIGURATION),
        (ParameterValidationError, ErrorCategory.CONFIGURATION),
        (UsageError, ErrorCategory.CONFIGURATION),
        (InvariantViolationError, ErrorCategory.INVARIANT),
        (TruncationError, ErrorCategory.NUMERICAL),
        (NumericalError, ErrorCategory.NUMERICAL),
        (ModelError, ErrorCategory.NUMERICAL),
        (DataPersistenceError, ErrorCategory.SYSTEM),
    )

    SUGGESTIONS = {
        ErrorCategory.CONFIGURATION: [
            "Check the circuit file keys and their unit suffixes",
            "Check the command-line flags against --help",
        ],
        ErrorCategory.NUMERICAL: [
            "Use a coarser grid spacing or a smaller margin",
            "Try a different --eigensolver",
        ],
        ErrorCategory.INVARIANT: [
            "Re-run with --log-level DEBUG and keep the output directory",
            "Report the failing seed; this is an implementation bug",
        ],
        ErrorCategory.SYSTEM: [
            "Check that the output directory is writable",
            "Check available disk space",
        ],
    }

    @classmethod
    def categorize(cls, error: BaseException) -> ErrorCategory:
        for exc_type, category in cls.CATEGORY_MAP:
            if isinstance(error, exc_type):
                return category
        return ErrorCategory.SYSTEM

    @classmethod
    def classify(cls, error: BaseException, context: Optional[Dict[str, Any]] = None) -> RunFailure:
        """Classify an exception and log it at the matching level.

        Args:
            error: The exception that ended the run
            context: Extra key/values added to the log record

        Returns:
            RunFailure: Category, exit code and report line
        """
        category = cls.categorize(error)
        message = str(error) or type(error).__name__
        key = getattr(error, 'key', None)
        if key and key not in message:
            message = f"{message} (key: {key})"

        failure = RunFailure(category=category, error_type=type(error).__name__,
                             message=message, suggested_actions=cls.SUGGESTIONS[category])

        details = dict(context or {})
        details.update(getattr(error, 'context', None) or {})
        if isinstance(error, NumericalError) and error.residuals:
            details['max_residual'] = max(error.residuals)

        if category is ErrorCategory.SYSTEM and not isinstance(error, DataPersistenceError):
            logger.error(f"Unhandled error: {error}", exc_info=error)
        else:
            logger.error(f"{category} failure: {message} {details if details else ''}".rstrip())
        return failure
