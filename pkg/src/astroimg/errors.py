"""Exception types raised across the toolkit."""

from __future__ import annotations


class AstroImgError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(AstroImgError, ValueError):
    """Array shapes are incompatible with the requested operation."""


class ParameterError(AstroImgError, ValueError):
    """A numeric parameter is outside its documented domain."""


class ContractError(AstroImgError, ValueError):
    """Input data violates an operation precondition (e.g. marker > mask)."""


class DegenerateError(AstroImgError, ValueError):
    """The data carry no usable structure (empty foreground, flat histogram)."""


class SingularityError(AstroImgError, ArithmeticError):
    """A linear system or frequency-domain division has no unique solution."""


class FormatError(AstroImgError, ValueError):
    """Malformed raster file. ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
