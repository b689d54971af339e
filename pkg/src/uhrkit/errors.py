"""Exception types shared across the toolkit."""

from __future__ import annotations


class UhrkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(UhrkitError, ValueError):
    """A configuration value is invalid or a key is unknown."""


class InvalidInputError(UhrkitError, ValueError):
    """An argument violates a documented precondition."""


class ParseError(UhrkitError, ValueError):
    """A manifest or score file could not be parsed.

    Carries the 1-based line number of the offending line when known.
    """

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ScorerUnavailableError(UhrkitError, RuntimeError):
    """The external aesthetic scorer died and could not be restarted."""


class NumericalError(UhrkitError, ArithmeticError):
    """A computation produced a non-finite value or failed to converge."""

    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step
