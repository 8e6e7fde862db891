"""
Exception hierarchy shared by every MinusFace module.
"""

from typing import Optional


class MinusFaceError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(MinusFaceError, ValueError):
    """An argument violates an operation's precondition (shape, range, count)."""


class StateError(MinusFaceError, RuntimeError):
    """An operation was called in the wrong state (no graph, no gradients, unfrozen model)."""


class FormatError(MinusFaceError, OSError):
    """A file could not be read or written in the expected format."""

    def __init__(self, path, reason: str, cause: Optional[BaseException] = None):
        self.path = str(path)
        self.reason = reason
        self.cause = cause
        super().__init__(f"{self.path}: {reason}")
