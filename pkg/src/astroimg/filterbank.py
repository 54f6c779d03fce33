"""Gaussian, Gabor and difference-of-Gaussians kernels, the LGN transform,
and a k-means filter bank learned from image patches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from astroimg.core import BoundaryMode, ModeLike, as_image, rescale_unit, separable_convolve
from astroimg.errors import ContractError, DimensionError, ParameterError

__all__ = [
    "GaborParams",
    "DoGParams",
    "FilterBank",
    "default_radius",
    "gaussian_taps",
    "gaussian_kernel",
    "gaussian_smooth",
    "gabor_kernel",
    "dog_response",
    "lgn_image",
    "extract_patches",
    "kmeans_filterbank",
]


def default_radius(sigma: float) -> int:
    return max(1, int(math.ceil(4.0 * sigma)))


def gaussian_taps(sigma: float, radius: int | None = None) -> np.ndarray:
    """Sampled 1-D Gaussian of length ``2*radius + 1`` summing to 1."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if radius is None:
        radius = default_radius(sigma)
    if radius < 0:
        raise ParameterError(f"radius must be non-negative, got {radius}")
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma)) / (sigma * math.sqrt(2.0 * math.pi))
    return g / g.sum()


def gaussian_kernel(sigma: float, radius: int | None = None) -> np.ndarray:
    """(2r+1)^2 product-form Gaussian kernel normalised to unit sum."""
    g = gaussian_taps(sigma, radius)
    k = np.outer(g, g)
    return k / k.sum()


def gaussian_smooth(img, sigma: float, mode: ModeLike = BoundaryMode.REFLECT) -> np.ndarray:
    """Separable Gaussian blur. The radius is clipped so the taps fit the frame."""
    img = as_image(img)
    radius = default_radius(sigma)
    ry = min(radius, (img.shape[0] - 1) // 2)
    rx = min(radius, (img.shape[1] - 1) // 2)
    return separable_convolve(img, gaussian_taps(sigma, rx), gaussian_taps(sigma, ry), mode)


@dataclass(frozen=True)
class GaborParams:
    lam: float  # sinusoid wavelength, pixels
    theta: float = 0.0
    psi: float = 0.0
    sigma: float = 2.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ParameterError(f"wavelength must be positive, got {self.lam}")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")


def gabor_kernel(p: GaborParams, radius: int | None = None, *, normalize: bool = False):
    """Even (cosine) and odd (sine) Gabor kernels of side ``2*radius + 1``.

    Rotated coordinates are ``x' = x cos(theta) + y sin(theta)`` and
    ``y' = -x sin(theta) + y cos(theta)``; the envelope is
    ``exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2))``. Rows of the returned
    arrays index y, columns index x. With ``normalize=True`` each kernel is
    scaled to unit l2 norm.
    """
    if radius is None:
        radius = max(1, int(math.ceil(3.0 * p.sigma / min(p.gamma, 1.0))))
    y, x = np.mgrid[-radius:radius + 1, -radius:radius + 1].astype(np.float64)
    ct, st = math.cos(p.theta), math.sin(p.theta)
    xr = x * ct + y * st
    yr = -x * st + y * ct
    envelope = np.exp(-(xr ** 2 + p.gamma ** 2 * yr ** 2) / (2.0 * p.sigma ** 2))
    phase = 2.0 * np.pi * xr / p.lam + p.psi
    even = envelope * np.cos(phase)
    odd = envelope * np.sin(phase)
    if normalize:
        for k in (even, odd):
            norm = np.linalg.norm(k)
            if norm > 0:
                k /= norm
    return even, odd


@dataclass(frozen=True)
class DoGParams:
    t: float = 1.0  # base scale as a variance, pixels^2
    dt: float = 1.0

    def __post_init__(self):
        if not (self.t > 0 and self.dt > 0):
            raise ParameterError(f"DoG scales must be positive, got t={self.t}, dt={self.dt}")


def dog_response(img, p: DoGParams = DoGParams()) -> np.ndarray:
    """``(t/dt) * (L(t + dt) - L(t))`` where L(s) is the blur at variance s.

    As dt -> 0 this tends to ``t * dL/dt = (t/2) * laplacian(L)``.
    """
    img = as_image(img)
    coarse = gaussian_smooth(img, math.sqrt(p.t + p.dt))
    fine = gaussian_smooth(img, math.sqrt(p.t))
    return (p.t / p.dt) * (coarse - fine)


def lgn_image(img, p: DoGParams = DoGParams()) -> np.ndarray:
    """Centre-surround (DoG) image rescaled to [0, 1]; constant responses give 0.5."""
    return rescale_unit(dog_response(img, p), constant_value=0.5)


def extract_patches(img, patch: int = 11, stride: int = 1) -> np.ndarray:
    """Zero-mean, unit-norm patches on a stride grid, shape ``(n, patch, patch)``.

    Patches are emitted row-major by origin. Patches with (numerically) zero
    variance are dropped.
    """
    img = as_image(img)
    if patch < 1 or patch % 2 == 0:
        raise ContractError(f"patch side must be odd and positive, got {patch}")
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    if patch > min(img.shape):
        raise DimensionError(f"patch {patch} larger than image {img.shape}")
    windows = sliding_window_view(img, (patch, patch))[::stride, ::stride]
    flat = windows.reshape(-1, patch * patch)
    centred = flat - flat.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centred * centred, axis=1))
    scale = np.maximum(np.abs(flat).max(axis=1), 1.0)
    keep = norms > 1e-12 * scale
    out = centred[keep] / norms[keep, np.newaxis]
    # second pass removes the residual mean left by the division
    out -= out.mean(axis=1, keepdims=True)
    out /= np.sqrt(np.sum(out * out, axis=1, keepdims=True))
    return out.reshape(-1, patch, patch)


@dataclass
class FilterBank:
    """Learned kernels, each zero-mean and unit-norm (or all-zero if dead)."""

    centroids: np.ndarray  # (k, patch, patch)
    inertia: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def patch(self) -> int:
        return self.centroids.shape[1]

    def montage(self, gap: int = 1) -> np.ndarray:
        """Tile the kernels into one [0, 1] image for inspection."""
        k, p = self.k, self.patch
        cols = int(math.ceil(math.sqrt(k)))
        rows = int(math.ceil(k / cols))
        out = np.zeros((rows * (p + gap) - gap, cols * (p + gap) - gap))
        for i, c in enumerate(self.centroids):
            r, q = divmod(i, cols)
            out[r * (p + gap):r * (p + gap) + p, q * (p + gap):q * (p + gap) + p] = rescale_unit(c)
        return out


def _sq_dists(x: np.ndarray, centres: np.ndarray, xx: np.ndarray | None = None) -> np.ndarray:
    # ||x||^2 - 2 x.c + ||c||^2 through einsum's own loops (no BLAS), so the
    # summation order never depends on library threading
    if xx is None:
        xx = np.einsum("ij,ij->i", x, x)
    cc = np.einsum("ij,ij->i", centres, centres)
    cross = np.einsum("ik,jk->ij", x, centres, optimize=False)
    return np.maximum(xx[:, np.newaxis] - 2.0 * cross + cc[np.newaxis, :], 0.0)


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    idx = [int(rng.integers(n))]
    d2 = _sq_dists(x, x[idx[0]][np.newaxis])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            cdf = np.cumsum(d2)
            pick = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            pick = min(pick, n - 1)
        else:
            pick = int(rng.integers(n))
        idx.append(pick)
        d2 = np.minimum(d2, _sq_dists(x, x[pick][np.newaxis])[:, 0])
    return x[idx].copy()


def kmeans_filterbank(patches, k: int = 16, seed: int = 0, max_iter: int = 100) -> FilterBank:
    """Lloyd's algorithm with k-means++ seeding over a patch set.

    Patches are sorted lexicographically first, so the result depends only on
    the set of patches and the seed. Empty clusters keep their previous
    centre. Final centres are re-normalised to zero mean and unit norm.
    """
    arr = np.asarray(patches, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DimensionError(f"patches must have shape (n, p, p), got {arr.shape}")
    n, p, _ = arr.shape
    if n == 0:
        raise ContractError("patch set is empty")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if k > n:
        raise ParameterError(f"k={k} exceeds the number of patches ({n})")
    if max_iter < 1:
        raise ParameterError(f"max_iter must be >= 1, got {max_iter}")

    x = arr.reshape(n, p * p)
    order = np.lexsort(x.T[::-1])
    x = x[order]

    rng = np.random.default_rng(seed)
    centres = _kmeans_pp(x, k, rng)
    labels = None
    inertia = []
    it = 0
    xx = np.einsum("ij,ij->i", x, x)
    for it in range(1, max_iter + 1):
        new_labels = np.argmin(_sq_dists(x, centres, xx), axis=1)
        resid = x - centres[new_labels]
        inertia.append(float(np.einsum("ij,ij->", resid, resid)))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        # cluster sums in patch-index order: stable sort, then segment reductions
        counts = np.bincount(labels, minlength=k)
        filled = counts > 0
        order = np.argsort(labels, kind="stable")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])[filled]
        sums = np.add.reduceat(x[order], starts, axis=0)
        centres[filled] = sums / counts[filled, np.newaxis]

    centres -= centres.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centres * centres, axis=1))
    dead = norms <= 1e-12
    centres[~dead] /= norms[~dead, np.newaxis]
    centres[dead] = 0.0
    return FilterBank(centroids=centres.reshape(k, p, p), inertia=inertia, n_iter=it)
