"""
Error Hierarchy for SliceLRTD

Every error raised by the library derives from LrtdError so callers (the CLI
in particular) can catch library failures in one place. Each class also
derives from the closest builtin so plain ``except ValueError`` keeps working.
"""


class LrtdError(Exception):
    """Base class for all library errors."""


class ShapeError(LrtdError, ValueError):
    """Tensor or matrix dimensions are incompatible."""


class InvalidArgumentError(LrtdError, ValueError):
    """An argument is outside its documented range."""


class UnsupportedLengthError(InvalidArgumentError):
    """A transform cannot be built for the requested length."""


class InvalidTransformError(InvalidArgumentError):
    """A transform matrix fails the M*M = l*I condition."""


class NumericError(LrtdError, ArithmeticError):
    """A numerical routine failed (SVD non-convergence, NaN iterates)."""


class NumericIntegrityError(NumericError):
    """A result that should be real carries a non-negligible imaginary part."""


class UndefinedStatisticError(LrtdError, ValueError):
    """A statistic is undefined for the given input (empty mask, constant image)."""


class VolumeFormatError(LrtdError, ValueError):
    """A volume header or payload is malformed."""


class SizeMismatchError(VolumeFormatError):
    """The raw payload size disagrees with the header."""


class UnsupportedElementTypeError(VolumeFormatError):
    """The header names an element type the reader does not support."""
