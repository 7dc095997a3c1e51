"""Lab exception hierarchy. Each exception maps to a process exit code."""

from typing import Any, Dict, Optional

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_BUDGET = 3
EXIT_FALSIFICATION = 4
EXIT_PRECISION = 5


class NilmixError(Exception):
    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class UnsupportedInput(NilmixError):
    """Input outside the implemented scope (e.g. a non-semisimple action)."""

    exit_code = EXIT_SCHEMA


class DegenerateInstance(NilmixError):
    """The instance violates a hypothesis (exact equality, zero constant...)."""

    exit_code = EXIT_SCHEMA


class FieldMismatch(NilmixError, ValueError):
    exit_code = EXIT_SCHEMA


class BudgetExceeded(NilmixError):
    exit_code = EXIT_BUDGET


class FalsificationError(NilmixError):
    """A measurement contradicting the theorem under test."""

    exit_code = EXIT_FALSIFICATION


class PrecisionExhausted(NilmixError):
    exit_code = EXIT_PRECISION


class CertificationUndecided(NilmixError):
    """A certificate could be neither established nor refuted."""

    exit_code = EXIT_PRECISION


class InternalConsistencyError(NilmixError):
    """Two independent computations of the same exact quantity disagree."""

    exit_code = EXIT_PRECISION
