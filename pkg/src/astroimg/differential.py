"""Image gradients, Hessian fields and the shape index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from astroimg.core import BoundaryMode, as_image, pad
from astroimg.errors import DimensionError, ParameterError
from astroimg.filterbank import gaussian_smooth

__all__ = [
    "GradientField",
    "HessianField",
    "SHAPE_INDEX_UNDEFINED",
    "gradient",
    "gradient_magnitude",
    "gradient_orientation",
    "hessian",
    "shape_index",
    "cap_mask",
    "orientation_to_rgb",
]

#: Value stored where the shape index is undefined (locally flat Hessian).
SHAPE_INDEX_UNDEFINED = -2.0

# eigenvalues below this fraction of the image-wide maximum count as zero
FLAT_RTOL = 1e-10


@dataclass(frozen=True)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray


@dataclass(frozen=True)
class HessianField:
    ixx: np.ndarray
    ixy: np.ndarray
    iyy: np.ndarray

    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-pixel eigenvalues ``(l1, l2)`` with ``l1 >= l2``."""
        mean = 0.5 * (self.ixx + self.iyy)
        radius = np.hypot(0.5 * (self.ixx - self.iyy), self.ixy)
        return mean + radius, mean - radius


def _diff_axis(f: np.ndarray, axis: int) -> np.ndarray:
    """Central differences inside, one-sided differences on the two borders."""
    f = np.moveaxis(f, axis, -1)
    out = np.empty_like(f)
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / 2.0
    out[..., 0] = f[..., 1] - f[..., 0]
    out[..., -1] = f[..., -1] - f[..., -2]
    return np.moveaxis(out, -1, axis)


def gradient(img) -> GradientField:
    img = as_image(img)
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise DimensionError(f"gradient needs at least 2x2 pixels, got {img.shape}")
    return GradientField(gx=_diff_axis(img, 1), gy=_diff_axis(img, 0))


def gradient_magnitude(gf: GradientField) -> np.ndarray:
    return np.sqrt(gf.gx ** 2 + gf.gy ** 2)


def gradient_orientation(gf: GradientField) -> np.ndarray:
    """Full-quadrant angle in (-pi, pi]; a zero gradient maps to 0."""
    theta = np.arctan2(gf.gy, gf.gx)
    # arctan2 returns -pi for (-0.0, negative); fold it onto +pi
    theta[theta == -np.pi] = np.pi
    zero = (gf.gx == 0) & (gf.gy == 0)
    theta[zero] = 0.0
    return theta


def hessian(img, sigma: float) -> HessianField:
    """Second partials of the Gaussian-smoothed image (reflect borders)."""
    if not sigma >= 0.5:
        raise ParameterError(f"sigma must be >= 0.5 pixels, got {sigma}")
    img = as_image(img)
    smooth = gaussian_smooth(img, sigma)
    p = pad(smooth, 1, 1, BoundaryMode.REFLECT)
    c = p[1:-1, 1:-1]
    ixx = p[1:-1, 2:] - 2.0 * c + p[1:-1, :-2]
    iyy = p[2:, 1:-1] - 2.0 * c + p[:-2, 1:-1]
    ixy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / 4.0
    return HessianField(ixx=ixx, ixy=ixy, iyy=iyy)


def shape_index(img, sigma: float = 1.0) -> np.ndarray:
    """Koenderink shape index in [-1, 1] computed at scale ``sigma``.

    With ordered eigenvalues l1 >= l2 the index is
    ``(2/pi) * arctan((l2 + l1) / (l2 - l1))``: bright caps give +1, dark
    cups -1, saddles 0. Locally flat pixels get ``SHAPE_INDEX_UNDEFINED``.
    """
    hf = hessian(img, sigma)
    l1, l2 = hf.eigenvalues()
    trace = hf.ixx + hf.iyy
    spread = 2.0 * np.hypot(0.5 * (hf.ixx - hf.iyy), hf.ixy)
    # arctan(a / b) with b = l2 - l1 <= 0 equals arctan2(-a, -b)
    si = (2.0 / np.pi) * np.arctan2(-trace, spread)
    scale = max(np.abs(l1).max(), np.abs(l2).max())
    flat = np.maximum(np.abs(l1), np.abs(l2)) <= FLAT_RTOL * scale
    si[flat] = SHAPE_INDEX_UNDEFINED
    return si


def cap_mask(si, target: float = 1.0, tol: float = 0.05) -> np.ndarray:
    """Pixels whose defined shape index lies within ``tol`` of ``target``."""
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    si = np.asarray(si, dtype=np.float64)
    defined = si != SHAPE_INDEX_UNDEFINED
    return defined & (np.abs(si - target) <= tol)


def orientation_to_rgb(theta, magnitude=None) -> np.ndarray:
    """HSV rendering of an orientation field as uint8 RGB.

    Hue encodes the angle, saturation is 1 and value is the normalised
    magnitude (1 everywhere when ``magnitude`` is omitted).
    """
    theta = np.asarray(theta, dtype=np.float64)
    hue = np.mod(theta, 2.0 * np.pi) / (2.0 * np.pi)
    if magnitude is None:
        val = np.ones_like(hue)
    else:
        mag = np.asarray(magnitude, dtype=np.float64)
        top = mag.max()
        val = mag / top if top > 0 else np.zeros_like(mag)
    h6 = hue * 6.0
    sector = np.floor(h6).astype(int) % 6
    frac = h6 - np.floor(h6)
    p = np.zeros_like(val)
    q = val * (1.0 - frac)
    t = val * frac
    choices = [
        (val, t, p),
        (q, val, p),
        (p, val, t),
        (p, q, val),
        (t, p, val),
        (val, p, q),
    ]
    rgb = np.zeros(theta.shape + (3,))
    for s, (r, g, b) in enumerate(choices):
        sel = sector == s
        rgb[sel, 0] = r[sel]
        rgb[sel, 1] = g[sel]
        rgb[sel, 2] = b[sel]
    return np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
