"""Seed markers shared by the random walker and watershed."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from astroimg.core import as_image
from astroimg.errors import ContractError, DegenerateError, ParameterError


@dataclass
class MarkerSet:
    """Seed pixels as ``(x, y, label)`` triples with ``label >= 1``."""

    markers: list[tuple[int, int, int]] = field(default_factory=list)
    derivation: str = "manual"

    @property
    def labels(self) -> list[int]:
        return sorted({lab for _, _, lab in self.markers})

    def validate(self, shape: tuple[int, int], min_labels: int = 1) -> None:
        h, w = shape
        for x, y, lab in self.markers:
            if not (0 <= x < w and 0 <= y < h):
                raise ContractError(f"marker ({x}, {y}) outside a {w}x{h} image")
            if lab < 1:
                raise ContractError(f"marker labels must be >= 1, got {lab}")
        if len(self.labels) < min_labels:
            raise ParameterError(f"need at least {min_labels} distinct marker labels, got {len(self.labels)}")

    def to_array(self, shape: tuple[int, int]) -> np.ndarray:
        """Label image with 0 for unmarked pixels (later markers win on overlap)."""
        self.validate(shape)
        out = np.zeros(shape, dtype=np.int64)
        for x, y, lab in self.markers:
            out[y, x] = lab
        return out

    @classmethod
    def from_array(cls, labels, derivation: str = "manual") -> "MarkerSet":
        arr = np.asarray(labels)
        ys, xs = np.nonzero(arr)
        return cls([(int(x), int(y), int(arr[y, x])) for y, x in zip(ys, xs)], derivation)


def markers_from_histogram(img, low_q: float = 0.05, high_q: float = 0.95) -> MarkerSet:
    """Label the histogram tails: ``<= q_low`` -> 1 (background), ``>= q_high`` -> 2.

    Quantiles use midpoint interpolation between order statistics.
    """
    if not (0 < low_q < high_q < 1):
        raise ParameterError(f"need 0 < low_q < high_q < 1, got {low_q}, {high_q}")
    img = as_image(img)
    lo, hi = np.quantile(img, [low_q, high_q], method="midpoint")
    if lo >= hi:
        raise DegenerateError(f"histogram tails coincide (both thresholds = {lo})")
    labels = np.zeros(img.shape, dtype=np.int64)
    labels[img <= lo] = 1
    labels[img >= hi] = 2
    return MarkerSet.from_array(labels, derivation=f"histogram_tails({low_q}, {high_q})")
