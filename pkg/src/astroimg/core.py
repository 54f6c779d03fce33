"""Image buffers, boundary handling, spatial convolution and the 2-D DFT.

Images are plain ``numpy.ndarray`` objects of shape ``(height, width)`` and
dtype ``float64``; kernels are 2-D arrays with odd side lengths whose anchor
is the centre element. Complex fields are ``complex128`` arrays with the same
layout.

The discrete Fourier transform is implemented here rather than borrowed
from ``numpy.fft`` so that its behaviour (normalisation, exactness for
arbitrary sizes) is pinned by this module alone:

* power-of-two lengths use a vectorised radix-2 decimation-in-time FFT;
* other lengths up to ``DIRECT_DFT_MAX`` use the exact O(n^2) DFT matrix;
* longer non-power-of-two lengths use Bluestein's chirp-z algorithm.

No strategy pads the transform itself, so ``dft2`` always returns the DFT of
the array it is given.
"""

from __future__ import annotations

from enum import Enum
from typing import Union

import numpy as np

from astroimg.errors import ContractError, DimensionError

__all__ = [
    "BoundaryMode",
    "as_image",
    "as_kernel",
    "pad",
    "convolve2d",
    "separable_convolve",
    "fft",
    "ifft",
    "dft2",
    "idft2",
    "rescale_unit",
]

DIRECT_DFT_MAX = 64
_RADIX_BASE = 16


class BoundaryMode(str, Enum):
    """How pixels outside the frame are synthesised."""

    REFLECT = "reflect"  # mirror without repeating the edge pixel
    REPLICATE = "replicate"
    ZERO = "zero"


ModeLike = Union[BoundaryMode, str]

_NP_PAD_MODE = {
    BoundaryMode.REFLECT: "reflect",
    BoundaryMode.REPLICATE: "edge",
    BoundaryMode.ZERO: "constant",
}


def as_image(img, *, name: str = "image", allow_nonfinite: bool = False) -> np.ndarray:
    """Validate and convert ``img`` to a 2-D float64 array.

    8-bit integer input is promoted to ``value / 255``.
    """
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be at least 1x1, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    else:
        arr = arr.astype(np.float64, copy=False)
    if not allow_nonfinite and not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains NaN or Inf values")
    return arr


def as_kernel(k, *, name: str = "kernel") -> np.ndarray:
    arr = np.asarray(k, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] % 2 == 0 or arr.shape[1] % 2 == 0:
        raise ContractError(f"{name} side lengths must be odd, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} weights must be finite")
    return arr


def _mode(mode: ModeLike) -> BoundaryMode:
    try:
        return BoundaryMode(mode)
    except ValueError:
        raise ContractError(f"unknown boundary mode {mode!r}") from None


def pad(img: np.ndarray, pad_y: int, pad_x: int, mode: ModeLike = BoundaryMode.REFLECT) -> np.ndarray:
    """Pad ``img`` by ``pad_y`` rows and ``pad_x`` columns on each side."""
    m = _mode(mode)
    if m is BoundaryMode.REFLECT and (img.shape[0] == 1 or img.shape[1] == 1):
        # numpy cannot mirror a length-1 axis; the mirror image of a single
        # sample is the sample itself
        out = img
        if img.shape[0] == 1 and pad_y:
            out = np.pad(out, ((pad_y, pad_y), (0, 0)), mode="edge")
        elif pad_y:
            out = np.pad(out, ((pad_y, pad_y), (0, 0)), mode="reflect")
        if img.shape[1] == 1 and pad_x:
            out = np.pad(out, ((0, 0), (pad_x, pad_x)), mode="edge")
        elif pad_x:
            out = np.pad(out, ((0, 0), (pad_x, pad_x)), mode="reflect")
        return out
    return np.pad(img, ((pad_y, pad_y), (pad_x, pad_x)), mode=_NP_PAD_MODE[m])


def convolve2d(img, k, mode: ModeLike = BoundaryMode.REFLECT) -> np.ndarray:
    """True 2-D convolution (kernel flipped) with same-size output.

    Each output pixel accumulates the kernel taps in a fixed row-major order,
    so results do not depend on how callers tile the work.
    """
    img = as_image(img)
    k = as_kernel(k)
    h, w = img.shape
    kh, kw = k.shape
    if kh > h or kw > w:
        raise DimensionError(f"kernel {k.shape} larger than image {img.shape}")
    ry, rx = kh // 2, kw // 2
    padded = pad(img, ry, rx, mode)
    out = np.zeros_like(img)
    for i in range(kh):
        for j in range(kw):
            # tap (i, j) multiplies img[y - (i - ry), x - (j - rx)]
            y0 = 2 * ry - i
            x0 = 2 * rx - j
            out += k[i, j] * padded[y0:y0 + h, x0:x0 + w]
    return out


def _as_taps(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).ravel()
    if arr.size % 2 == 0:
        raise ContractError(f"{name} must have odd length, got {arr.size}")
    return arr


def separable_convolve(img, row, col, mode: ModeLike = BoundaryMode.REFLECT) -> np.ndarray:
    """Convolve with the outer-product kernel ``outer(col, row)``.

    ``row`` runs along x (columns), ``col`` along y (rows).
    """
    img = as_image(img)
    row = _as_taps(row, "row")
    col = _as_taps(col, "col")
    h, w = img.shape
    if col.size > h or row.size > w:
        raise DimensionError(f"kernel ({col.size}, {row.size}) larger than image {img.shape}")
    ry, rx = col.size // 2, row.size // 2

    padded = pad(img, 0, rx, mode)
    tmp = np.zeros_like(img)
    for j in range(row.size):
        x0 = 2 * rx - j
        tmp += row[j] * padded[:, x0:x0 + w]

    padded = pad(tmp, ry, 0, mode)
    out = np.zeros_like(img)
    for i in range(col.size):
        y0 = 2 * ry - i
        out += col[i] * padded[y0:y0 + h, :]
    return out


# ---------------------------------------------------------------------------
# Fourier transforms


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _dft_matrix(n: int) -> np.ndarray:
    idx = np.arange(n)
    # reduce the exponent modulo n before scaling to keep the phase exact
    prod = np.outer(idx, idx) % n
    return np.exp(-2j * np.pi * prod / n)


def _fft_pow2(x: np.ndarray) -> np.ndarray:
    b, n = x.shape
    base = min(n, _RADIX_BASE)
    m = _dft_matrix(base)
    # X[:, k, j] is the length-`base` DFT of x[:, j::n // base]
    X = np.einsum("ki,bij->bkj", m, x.reshape(b, base, n // base))
    while X.shape[1] < n:
        half = X.shape[2] // 2
        even = X[:, :, :half]
        odd = X[:, :, half:]
        size = X.shape[1]
        twiddle = np.exp(-1j * np.pi * np.arange(size) / size)[np.newaxis, :, np.newaxis]
        X = np.concatenate([even + twiddle * odd, even - twiddle * odd], axis=1)
    return X.reshape(b, n)


def _fft_bluestein(x: np.ndarray) -> np.ndarray:
    b, n = x.shape
    k = np.arange(n)
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
    m = 1
    while m < 2 * n - 1:
        m <<= 1
    a = np.zeros((b, m), dtype=np.complex128)
    a[:, :n] = x * chirp
    c = np.zeros((1, m), dtype=np.complex128)
    c[0, :n] = np.conj(chirp)
    c[0, m - n + 1:] = np.conj(chirp[1:][::-1])
    fa = _fft_pow2(a)
    fc = _fft_pow2(c)
    conv = np.conj(_fft_pow2(np.conj(fa * fc))) / m
    return conv[:, :n] * chirp


def _fft_rows(x: np.ndarray) -> np.ndarray:
    n = x.shape[1]
    if n == 1:
        return x.copy()
    if _is_pow2(n):
        return _fft_pow2(x)
    if n <= DIRECT_DFT_MAX:
        return x @ _dft_matrix(n).T
    return _fft_bluestein(x)


def fft(x, axis: int = -1) -> np.ndarray:
    """Unnormalised forward DFT along ``axis``."""
    arr = np.asarray(x, dtype=np.complex128)
    moved = np.moveaxis(arr, axis, -1)
    shape = moved.shape
    out = _fft_rows(np.ascontiguousarray(moved.reshape(-1, shape[-1])))
    return np.moveaxis(out.reshape(shape), -1, axis)


def ifft(x, axis: int = -1) -> np.ndarray:
    """Inverse DFT along ``axis``, divided by the axis length."""
    arr = np.asarray(x, dtype=np.complex128)
    n = arr.shape[axis]
    return np.conj(fft(np.conj(arr), axis=axis)) / n


def dft2(img) -> np.ndarray:
    """Unnormalised 2-D DFT. ``out[v, u]`` pairs row frequency v with column frequency u."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise DimensionError(f"dft2 expects a 2-D array, got shape {arr.shape}")
    return fft(fft(arr, axis=1), axis=0)


def idft2(field, *, real: bool = True) -> np.ndarray:
    """Inverse of :func:`dft2`, divided by ``width * height``.

    With ``real=True`` (the default) the imaginary residue is discarded.
    """
    arr = np.asarray(field)
    if arr.ndim != 2:
        raise DimensionError(f"idft2 expects a 2-D array, got shape {arr.shape}")
    out = ifft(ifft(arr, axis=0), axis=1)
    return out.real.copy() if real else out


def rescale_unit(img, *, constant_value: float = 0.5) -> np.ndarray:
    """Affine max-min rescale to [0, 1]; a constant image maps to ``constant_value``."""
    img = as_image(img)
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.full_like(img, constant_value)
    out = (img - lo) / (hi - lo)
    # pin the extremes exactly; rounding can leave 1 - ulp at the maximum
    out[img == hi] = 1.0
    out[img == lo] = 0.0
    return out
