"""Exception hierarchy shared across the package.

Every error raised by library code derives from :class:`EngineError`, so
callers (including the CLI) can catch one type.  Subclasses carry a short
machine-readable ``code`` where the failure mode matters to callers.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(EngineError):
    """An array argument has the wrong rank, size, or dimension pairing."""


class ConfigError(EngineError):
    """A configuration value is out of range or inconsistent."""


class WeightError(EngineError):
    """A weight store is missing a tensor or holds one with a bad shape."""


class FormatError(EngineError):
    """A serialized file is malformed.

    ``code`` is one of: ``bad_magic``, ``bad_version``, ``truncated``,
    ``trailing_data``, ``bad_directory``, ``bad_value``.
    """

    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


class StreamError(EngineError):
    """A streaming-session operation was used out of order or on bad state."""
