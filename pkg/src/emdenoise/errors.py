"""Exception types shared across the package.

Contract violations on in-memory arguments (wrong lengths, non-monotonic
knots, bad configuration values) raise plain ValueError; the classes here
mark conditions a caller may reasonably want to catch and handle, such as
signals too flat to decompose or unreadable files.
"""


class EmdenoiseError(Exception):
    """Base class for package-specific errors."""


class InsufficientExtremaError(EmdenoiseError):
    """A signal does not carry enough extrema for the requested operation."""


class DataFormatError(EmdenoiseError):
    """A CSV, weights, or manifest file is malformed or inconsistent."""


class NumericError(EmdenoiseError):
    """A numeric computation produced NaN or infinity where finite values are required."""
