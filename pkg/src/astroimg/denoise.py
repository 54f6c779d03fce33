"""Noise estimation and pixel-wise non-local means."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from astroimg.core import BoundaryMode, as_image, pad
from astroimg.errors import DimensionError, ParameterError

__all__ = [
    "Weighting",
    "NlmParams",
    "estimate_noise_sigma",
    "nlm_denoise",
    "patch_weights",
    "psnr",
    "FAST_H_FACTOR",
    "SLOW_H_FACTOR",
]

# default filtering strength as a multiple of the estimated noise sigma
FAST_H_FACTOR = 1.15
SLOW_H_FACTOR = 0.8


def estimate_noise_sigma(img) -> float:
    """Std of additive Gaussian noise from the 3x3 Laplacian-difference residual.

    The mask ``[[1,-2,1],[-2,4,-2],[1,-2,1]]`` annihilates locally planar
    structure; for pure Gaussian noise ``E|r| = 6 sigma sqrt(2/pi)`` over the
    interior pixels.
    """
    img = as_image(img)
    h, w = img.shape
    if h < 3 or w < 3:
        raise DimensionError(f"noise estimation needs at least 3x3 pixels, got {img.shape}")
    c = img
    r = (
        c[:-2, :-2] - 2 * c[:-2, 1:-1] + c[:-2, 2:]
        - 2 * c[1:-1, :-2] + 4 * c[1:-1, 1:-1] - 2 * c[1:-1, 2:]
        + c[2:, :-2] - 2 * c[2:, 1:-1] + c[2:, 2:]
    )
    return float(math.sqrt(math.pi / 2.0) * np.abs(r).sum() / (6.0 * (w - 2) * (h - 2)))


class Weighting(str, Enum):
    UNIFORM = "uniform"  # the "fast" variant
    GAUSSIAN = "gaussian"  # the "slow" variant


@dataclass(frozen=True)
class NlmParams:
    h: float
    patch_radius: int = 3
    search_radius: int = 10
    weighting: Weighting = Weighting.UNIFORM
    sigma_patch: float | None = None  # Gaussian weighting only; default patch_radius / 2
    sigma: float | None = None  # noise std; estimated from the image when None

    def __post_init__(self):
        if not self.h > 0:
            raise ParameterError(f"h must be positive, got {self.h}")
        if self.patch_radius < 0:
            raise ParameterError(f"patch_radius must be >= 0, got {self.patch_radius}")
        if self.search_radius < self.patch_radius:
            raise ParameterError("search_radius must be >= patch_radius")
        if self.sigma is not None and self.sigma < 0:
            raise ParameterError(f"sigma must be non-negative, got {self.sigma}")
        if self.sigma_patch is not None and not self.sigma_patch > 0:
            raise ParameterError(f"sigma_patch must be positive, got {self.sigma_patch}")
        object.__setattr__(self, "weighting", Weighting(self.weighting))


def patch_weights(p: NlmParams) -> np.ndarray:
    """1-D taps whose outer product weights the squared patch differences (sum 1)."""
    n = 2 * p.patch_radius + 1
    if p.weighting is Weighting.UNIFORM or p.patch_radius == 0:
        return np.full(n, 1.0 / n)
    s = p.sigma_patch if p.sigma_patch is not None else max(p.patch_radius / 2.0, 0.5)
    x = np.arange(-p.patch_radius, p.patch_radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * s * s))
    return g / g.sum()


def _nlm_rows(padded, y0, y1, width, p, taps, sigma2, inv_h2):
    """Denoise output rows [y0, y1). ``padded`` is reflect-padded by pr + sr."""
    pr, sr = p.patch_radius, p.search_radius
    off = pr + sr
    rows = y1 - y0
    # reference region: the output rows plus a patch-radius margin
    ref = padded[y0 + sr:y1 + sr + 2 * pr, sr:sr + width + 2 * pr]
    num = np.zeros((rows, width))
    den = np.zeros((rows, width))
    n = taps.size
    for dy in range(-sr, sr + 1):
        for dx in range(-sr, sr + 1):
            cand = padded[y0 + sr + dy:y1 + sr + dy + 2 * pr, sr + dx:sr + dx + width + 2 * pr]
            diff = ref - cand
            d2 = diff * diff
            tmp = np.zeros((d2.shape[0], width))
            for j in range(n):
                tmp += taps[j] * d2[:, j:j + width]
            dist = np.zeros((rows, width))
            for i in range(n):
                dist += taps[i] * tmp[i:i + rows, :]
            wgt = np.exp(-np.maximum(dist - 2.0 * sigma2, 0.0) * inv_h2)
            num += wgt * padded[y0 + off + dy:y1 + off + dy, off + dx:off + dx + width]
            den += wgt
    return num / den


def nlm_denoise(img, p: NlmParams, threads: int = 1) -> np.ndarray:
    """Pixel-wise non-local means with reflect borders.

    Each pixel becomes the weighted mean of the pixels in its search window;
    the weight of candidate j is ``exp(-max(d2 - 2 sigma^2, 0) / h^2)`` where
    d2 is the (uniform- or Gaussian-) weighted mean squared difference of the
    two patches. Work is split into row bands across ``threads``; every pixel
    is computed with the same arithmetic regardless of the split.
    """
    img = as_image(img)
    h, w = img.shape
    sigma = p.sigma if p.sigma is not None else (estimate_noise_sigma(img) if min(h, w) >= 3 else 0.0)
    taps = patch_weights(p)
    off = p.patch_radius + p.search_radius
    padded = pad(img, off, off, BoundaryMode.REFLECT)
    sigma2 = sigma * sigma
    inv_h2 = 1.0 / (p.h * p.h)

    threads = max(1, int(threads))
    bands = np.linspace(0, h, min(threads, h) + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(bands[:-1], bands[1:]) if b > a]
    if len(spans) == 1:
        return _nlm_rows(padded, 0, h, w, p, taps, sigma2, inv_h2)
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        parts = list(pool.map(lambda s: _nlm_rows(padded, s[0], s[1], w, p, taps, sigma2, inv_h2), spans))
    return np.vstack(parts)


def psnr(reference, test, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB."""
    mse = float(np.mean((np.asarray(reference, float) - np.asarray(test, float)) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(data_range * data_range / mse)
