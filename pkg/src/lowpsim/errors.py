"""Exception hierarchy shared by every module."""

from __future__ import annotations


class LowpError(Exception):
    """Base class for all errors raised by lowpsim."""


class FormatError(LowpError, ValueError):
    """A number format or rounding parameter is out of its valid range."""


class InvalidInputError(LowpError, ValueError):
    """Numeric input is unusable (non-finite, overflow of the storage format)."""


class TooLargeError(LowpError):
    """The representable set of a format exceeds the enumeration cap."""


class ShapeError(LowpError, ValueError):
    pass


class UnsupportedFormatError(LowpError):
    """The requested implementation cannot simulate this format."""


class InjectionError(LowpError):
    pass


class StaleCacheError(LowpError):
    pass


class EquivalenceError(LowpError):
    """Two implementations that must agree bit-for-bit did not."""
