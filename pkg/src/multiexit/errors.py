"""Exception types shared across the package.

Data problems raise subclasses of :class:`DataError` so callers (notably the
CLI) can distinguish bad input data from usage mistakes.
"""

from __future__ import annotations


class DataError(ValueError):
    """Base class for anything wrong with input data or configuration."""


class ValidationError(DataError):
    """An invariant on a value was violated.

    ``invariant`` is a short machine-checkable name for the violated
    invariant (e.g. ``"normalization"``, ``"shape"``); it is always the
    first word of the message.
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class ParseError(ValidationError):
    """A file could not be parsed; carries the 1-based line number."""

    def __init__(self, invariant: str, message: str, *, line: int):
        super().__init__(invariant, f"line {line}: {message}")
        self.line = line


class LabelRequiredError(DataError):
    """An operation needing true labels was given unlabeled traces."""


class EmptyDatasetError(DataError):
    """An operation needing samples was given an empty dataset."""
