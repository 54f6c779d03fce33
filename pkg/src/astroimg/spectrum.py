"""2-D power spectra and their azimuthal (radial) averages."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from astroimg.core import as_image, dft2
from astroimg.errors import ParameterError

__all__ = ["Spectrum", "hann_window", "power_spectrum_2d", "radial_average", "spectrum_center"]


@dataclass
class Spectrum:
    power2d: np.ndarray  # DC at spectrum_center()
    radial_freq: np.ndarray  # bin centres, cycles per image
    radial_power: np.ndarray  # mean power per annulus (0 for empty bins)
    counts: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bin", "freq", "power", "count"])
        for b, (f, p, c) in enumerate(zip(self.radial_freq, self.radial_power, self.counts)):
            writer.writerow([b, repr(float(f)), repr(float(p)), int(c)])
        return buf.getvalue()


def spectrum_center(shape: tuple[int, int]) -> tuple[int, int]:
    """(row, col) of the zero-frequency bin after centring."""
    return shape[0] // 2, shape[1] // 2


def hann_window(shape: tuple[int, int]) -> np.ndarray:
    def taps(n):
        if n == 1:
            return np.ones(1)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / (n - 1))

    return np.outer(taps(shape[0]), taps(shape[1]))


def power_spectrum_2d(img, window: str | None = None) -> np.ndarray:
    """``|DFT|^2`` with the zero-frequency bin moved to ``spectrum_center``."""
    img = as_image(img)
    if window == "hann":
        img = img * hann_window(img.shape)
    elif window is not None:
        raise ParameterError(f"unknown window {window!r}")
    X = dft2(img)
    power = (X * np.conj(X)).real
    cy, cx = spectrum_center(img.shape)
    return np.roll(power, (cy, cx), axis=(0, 1))


def radial_average(power2d, nbins: int | None = None) -> Spectrum:
    """Mean power over unit-width annuli about the spectrum centre.

    Radii are rounded half-up to integers; bin ``b`` holds radius ``b`` and
    the last bin also absorbs every larger radius, so the bins partition the
    plane.
    """
    power2d = as_image(power2d, name="power2d")
    h, w = power2d.shape
    if nbins is None:
        nbins = max(1, min(h, w) // 2)
    if nbins < 1:
        raise ParameterError(f"nbins must be >= 1, got {nbins}")
    cy, cx = spectrum_center(power2d.shape)
    y, x = np.mgrid[:h, :w]
    radius = np.hypot(y - cy, x - cx)
    bins = np.minimum(np.floor(radius + 0.5).astype(np.int64), nbins - 1)
    counts = np.bincount(bins.ravel(), minlength=nbins)
    sums = np.bincount(bins.ravel(), weights=power2d.ravel(), minlength=nbins)
    mean = np.zeros(nbins)
    nz = counts > 0
    mean[nz] = sums[nz] / counts[nz]
    return Spectrum(
        power2d=power2d,
        radial_freq=np.arange(nbins, dtype=np.float64),
        radial_power=mean,
        counts=counts,
    )
