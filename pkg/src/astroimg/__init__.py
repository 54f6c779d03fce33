"""Astronomical image analysis: extrema, shape index, gradients, filter banks,
denoising, deconvolution, segmentation, and power spectra on numpy arrays."""

from astroimg.core import BoundaryMode, convolve2d, dft2, idft2, separable_convolve
from astroimg.errors import (
    AstroImgError,
    ContractError,
    DegenerateError,
    DimensionError,
    FormatError,
    ParameterError,
    SingularityError,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryMode",
    "convolve2d",
    "separable_convolve",
    "dft2",
    "idft2",
    "AstroImgError",
    "ContractError",
    "DegenerateError",
    "DimensionError",
    "FormatError",
    "ParameterError",
    "SingularityError",
]
