"""Synthetic test scenes: elliptical galaxies, two-tone disks, overlapping pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from astroimg.errors import ParameterError

__all__ = [
    "Noise",
    "SynthGalaxySpec",
    "parse_noise",
    "apply_noise",
    "galaxy_profile",
    "synth_galaxy",
    "disk_image",
    "disk_pair_mask",
    "demo_scene",
]


@dataclass(frozen=True)
class Noise:
    kind: str = "none"  # "none" | "gauss" | "sp"
    level: float = 0.0  # sigma for gauss, flipped fraction for sp

    def __post_init__(self):
        if self.kind not in ("none", "gauss", "sp"):
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gauss" and self.level < 0:
            raise ParameterError(f"noise sigma must be >= 0, got {self.level}")
        if self.kind == "sp" and not 0 <= self.level <= 1:
            raise ParameterError(f"salt-and-pepper amount must be in [0, 1], got {self.level}")


def parse_noise(text: str) -> Noise:
    """Parse ``none``, ``gauss:<sigma>`` or ``sp:<amount>``."""
    kind, _, value = text.partition(":")
    if kind == "none" and not value:
        return Noise()
    if kind in ("gauss", "sp") and value:
        try:
            return Noise(kind, float(value))
        except ValueError:
            pass
    raise ParameterError(f"noise must be none, gauss:<sigma> or sp:<amount>, got {text!r}")


def apply_noise(img: np.ndarray, noise: Noise, seed: int) -> np.ndarray:
    """Additive Gaussian noise (not clipped) or salt-and-pepper flips to 0/1."""
    rng = np.random.default_rng(seed)
    if noise.kind == "gauss":
        return img + rng.normal(0.0, noise.level, img.shape)
    if noise.kind == "sp":
        out = img.copy()
        flip = rng.random(img.shape) < noise.level
        salt = rng.random(img.shape) < 0.5
        out[flip & salt] = 1.0
        out[flip & ~salt] = 0.0
        return out
    return img.copy()


@dataclass(frozen=True)
class SynthGalaxySpec:
    width: int = 128
    height: int = 128
    center: tuple[float, float] | None = None  # (x, y); defaults to (width // 2, height // 2)
    axis_ratio: float = 0.6
    position_angle: float = 0.5  # radians, major axis from +x toward +y
    scale_length: float = 10.0
    peak: float = 0.9
    noise: Noise = Noise()
    seed: int = 0
    clip: bool = False  # clamp the noisy result to [0, 1]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ParameterError("image dimensions must be positive")
        if not 0 < self.axis_ratio <= 1:
            raise ParameterError(f"axis_ratio must be in (0, 1], got {self.axis_ratio}")
        if not self.scale_length > 0:
            raise ParameterError(f"scale_length must be positive, got {self.scale_length}")
        if not 0 < self.peak <= 1:
            raise ParameterError(f"peak must be in (0, 1], got {self.peak}")


def galaxy_profile(s: SynthGalaxySpec) -> np.ndarray:
    """Noise-free exponential profile ``peak * exp(-r_ell / scale_length)``."""
    cx, cy = s.center if s.center is not None else (s.width // 2, s.height // 2)
    y, x = np.mgrid[:s.height, :s.width].astype(np.float64)
    dx, dy = x - cx, y - cy
    ca, sa = math.cos(s.position_angle), math.sin(s.position_angle)
    major = dx * ca + dy * sa
    minor = -dx * sa + dy * ca
    r_ell = np.sqrt(major ** 2 + (minor / s.axis_ratio) ** 2)
    return s.peak * np.exp(-r_ell / s.scale_length)


def synth_galaxy(s: SynthGalaxySpec = SynthGalaxySpec()) -> np.ndarray:
    img = apply_noise(galaxy_profile(s), s.noise, s.seed)
    return np.clip(img, 0.0, 1.0) if s.clip else img


def disk_image(width: int, height: int, center: tuple[float, float], radius: float,
               inside: float = 1.0, outside: float = 0.0) -> np.ndarray:
    """Two-tone disk: ``inside`` where ``(x-cx)^2 + (y-cy)^2 <= r^2``."""
    y, x = np.mgrid[:height, :width].astype(np.float64)
    disk = (x - center[0]) ** 2 + (y - center[1]) ** 2 <= radius ** 2
    return np.where(disk, inside, outside).astype(np.float64)


def disk_pair_mask(width: int = 64, height: int = 48, radius: float = 10.0, separation: float = 14.0) -> np.ndarray:
    """Binary mask of two equal disks placed symmetrically about x = width / 2."""
    cy = height / 2.0
    left = disk_image(width, height, (width / 2.0 - separation / 2.0, cy), radius)
    right = disk_image(width, height, (width / 2.0 + separation / 2.0, cy), radius)
    return np.maximum(left, right).astype(np.int64)


def demo_scene(size: int = 128, seed: int = 0, noise_sigma: float = 0.05) -> np.ndarray:
    """Built-in fixture: an elliptical galaxy with a fainter companion, plus Gaussian noise."""
    main = SynthGalaxySpec(width=size, height=size, center=(size * 0.45, size * 0.5),
                           axis_ratio=0.6, position_angle=0.5, scale_length=size / 12.0, peak=0.9)
    companion = SynthGalaxySpec(width=size, height=size, center=(size * 0.68, size * 0.42),
                                axis_ratio=0.8, position_angle=-0.3, scale_length=size / 24.0, peak=0.6)
    clean = np.maximum(galaxy_profile(main), galaxy_profile(companion))
    return apply_noise(clean, Noise("gauss", noise_sigma), seed)
