"""Exception types raised across the package."""


class MSSRError(Exception):
    """Base class for all package errors."""


class ShapeError(MSSRError, ValueError):
    """Operand dimensions are incompatible with the requested operation."""


class DimensionError(ShapeError):
    """A tensor was requested with invalid dimensions."""


class FormatError(MSSRError, ValueError):
    """A file does not follow the expected binary layout."""


class NumericError(MSSRError, FloatingPointError):
    """A non-finite value appeared where a finite one is required."""


class StateError(MSSRError, RuntimeError):
    """An object was used in an invalid state (stale cache, empty corpus)."""


class CompatibilityError(MSSRError, ValueError):
    """A weight file does not match the requested network configuration."""


class ImageIOError(MSSRError, OSError):
    """An image file could not be read completely."""
