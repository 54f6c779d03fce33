"""Regional maxima, geodesic reconstruction and the h-maxima transform."""

from __future__ import annotations

from collections import deque
from enum import IntEnum

import numpy as np

from astroimg.core import as_image
from astroimg.errors import ContractError, DimensionError, ParameterError

__all__ = [
    "Connectivity",
    "neighbor_offsets",
    "regional_maxima",
    "reconstruct_by_dilation",
    "h_maxima",
]


class Connectivity(IntEnum):
    FOUR = 4
    EIGHT = 8


_OFFSETS = {
    Connectivity.FOUR: ((-1, 0), (0, -1), (0, 1), (1, 0)),
    Connectivity.EIGHT: ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)),
}


def neighbor_offsets(conn) -> tuple[tuple[int, int], ...]:
    """(dy, dx) offsets for ``conn`` in raster order."""
    try:
        return _OFFSETS[Connectivity(int(conn))]
    except ValueError:
        raise ParameterError(f"connectivity must be 4 or 8, got {conn!r}") from None


def _neighbor_table(h: int, w: int, conn) -> list[list[int]]:
    """Flat-index neighbour lists, raster-ordered, clipped to the frame."""
    offsets = neighbor_offsets(conn)
    table = []
    for y in range(h):
        for x in range(w):
            nb = []
            for dy, dx in offsets:
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w:
                    nb.append(yy * w + xx)
            table.append(nb)
    return table


def regional_maxima(img, conn=Connectivity.EIGHT) -> np.ndarray:
    """Boolean mask of regional-maximum plateaus.

    A pixel is marked iff the connected set of equal-valued pixels that
    contains it has no neighbour with a strictly greater value.
    """
    img = as_image(img)
    h, w = img.shape
    flat = img.ravel().tolist()
    table = _neighbor_table(h, w, conn)
    n = h * w

    # seeds: pixels with a strictly higher neighbour
    not_max = [False] * n
    stack = []
    for p in range(n):
        v = flat[p]
        for q in table[p]:
            if flat[q] > v:
                not_max[p] = True
                stack.append(p)
                break
    # the whole plateau of a seed is disqualified
    while stack:
        p = stack.pop()
        v = flat[p]
        for q in table[p]:
            if not not_max[q] and flat[q] == v:
                not_max[q] = True
                stack.append(q)
    return ~np.array(not_max, dtype=bool).reshape(h, w)


def reconstruct_by_dilation(marker, mask, conn=Connectivity.EIGHT) -> np.ndarray:
    """Grey-level geodesic reconstruction of ``marker`` under ``mask``.

    Uses the hybrid raster-scan / FIFO algorithm: one forward and one
    backward sweep propagate most of the dilation, and a queue finishes the
    pixels whose values can still rise.
    """
    marker = as_image(marker, name="marker")
    mask = as_image(mask, name="mask")
    if marker.shape != mask.shape:
        raise DimensionError(f"marker {marker.shape} and mask {mask.shape} differ in shape")
    if np.any(marker > mask):
        raise ContractError("marker must not exceed mask anywhere")

    h, w = mask.shape
    J = marker.ravel().tolist()
    I = mask.ravel().tolist()
    table = _neighbor_table(h, w, conn)
    n = h * w

    # raster-order split of each neighbourhood (neighbour lists are raster-sorted)
    before = [[q for q in nb if q < p] for p, nb in enumerate(table)]
    after = [[q for q in nb if q > p] for p, nb in enumerate(table)]

    for p in range(n):
        v = J[p]
        for q in before[p]:
            if J[q] > v:
                v = J[q]
        J[p] = v if v < I[p] else I[p]

    queue = deque()
    for p in range(n - 1, -1, -1):
        v = J[p]
        for q in after[p]:
            if J[q] > v:
                v = J[q]
        v = v if v < I[p] else I[p]
        J[p] = v
        for q in after[p]:
            if J[q] < v and J[q] < I[q]:
                queue.append(p)
                break

    while queue:
        p = queue.popleft()
        v = J[p]
        for q in table[p]:
            jq = J[q]
            if jq < v and I[q] != jq:
                J[q] = v if v < I[q] else I[q]
                queue.append(q)

    return np.array(J, dtype=np.float64).reshape(h, w)


def h_maxima(img, h: float, conn=Connectivity.EIGHT) -> np.ndarray:
    """Mask of the maxima whose dynamic (local contrast) is at least ``h``.

    ``h`` is in raw intensity units. The reconstruction of ``img - h`` under
    ``img`` equals ``img - h`` exactly on the tops of the surviving maxima and
    is strictly higher everywhere else, so the comparison is exact.
    """
    if not h > 0:
        raise ParameterError(f"h must be positive, got {h}")
    img = as_image(img)
    marker = img - h
    rec = reconstruct_by_dilation(marker, img, conn)
    return rec == marker
