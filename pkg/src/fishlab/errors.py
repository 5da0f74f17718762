"""Exception types shared across the package."""

from __future__ import annotations


class FishlabError(Exception):
    """Base class for every error raised by fishlab."""


class ConfigError(FishlabError, ValueError):
    """A configuration value is missing or out of range.

    ``field`` names the offending parameter so callers (the CLI in
    particular) can report it.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class ParseError(FishlabError, ValueError):
    """Input text could not be parsed. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None) -> None:
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class StateError(FishlabError, RuntimeError):
    """An operation is invalid for the current object state."""


class EmptySketchError(StateError):
    """Raised when a statistic needs at least one tracked key."""
