"""Exact Euclidean distance transform, marker watershed, and overlap splitting."""

from __future__ import annotations

import heapq
import math

import numpy as np

from astroimg.core import as_image
from astroimg.errors import ContractError, DegenerateError, ParameterError
from astroimg.morphology import Connectivity, h_maxima, neighbor_offsets
from astroimg.segment.markers import MarkerSet

DEFAULT_PEAK_H = 1.0
DEFAULT_PEAK_MIN_DISTANCE = 5.0


def _binary(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ContractError(f"mask must be 2-D, got shape {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ContractError("mask must be binary (values 0 and 1)")
    return arr.astype(bool)


def _edt_1d(f: list[float]) -> list[float]:
    """Lower envelope of parabolas (Felzenszwalb-Huttenlocher) for one line.

    ``f`` holds squared distances, ``inf`` where unknown.
    """
    n = len(f)
    sites = [q for q in range(n) if f[q] != math.inf]
    if not sites:
        return [math.inf] * n
    v = [sites[0]]
    z = [-math.inf, math.inf]
    for q in sites[1:]:
        while True:
            r = v[-1]
            s = ((f[q] + q * q) - (f[r] + r * r)) / (2.0 * (q - r))
            if s <= z[-2]:
                v.pop()
                z.pop()
                continue
            break
        v.append(q)
        z[-1] = s
        z.append(math.inf)
    out = [0.0] * n
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        r = v[k]
        out[q] = (q - r) * (q - r) + f[r]
    return out


def distance_transform(mask) -> np.ndarray:
    """Euclidean distance from each foreground pixel to the nearest background pixel.

    Background pixels are 0. The frame border is not background: a mask with
    no background at all yields ``inf`` everywhere.
    """
    fg = _binary(mask)
    h, w = fg.shape
    sq = np.where(fg, math.inf, 0.0)
    for x in range(w):
        sq[:, x] = _edt_1d(sq[:, x].tolist())
    for y in range(h):
        sq[y, :] = _edt_1d(sq[y, :].tolist())
    return np.sqrt(sq)


def _marker_image(markers, shape) -> np.ndarray:
    if isinstance(markers, MarkerSet):
        return markers.to_array(shape)
    arr = np.asarray(markers)
    if arr.shape != shape:
        raise ContractError(f"marker image {arr.shape} does not match relief {shape}")
    if np.any(arr < 0):
        raise ContractError("marker labels must be non-negative")
    return arr.astype(np.int64)


def watershed(relief, markers, conn=Connectivity.EIGHT, mask=None) -> np.ndarray:
    """Marker-driven priority flood.

    Marker pixels enter a min-queue keyed by ``(relief, insertion sequence)``
    in raster order. Popping a pixel lets its label claim every unlabelled
    neighbour, which is then queued. Ties therefore resolve by insertion
    order. Pixels outside ``mask`` (when given) stay 0; without a mask every
    pixel is labelled.
    """
    relief = as_image(relief, name="relief")
    h, w = relief.shape
    seeds = _marker_image(markers, relief.shape)
    if not np.any(seeds > 0):
        raise ParameterError("watershed needs at least one marker")
    allowed = np.ones((h, w), dtype=bool) if mask is None else _binary(mask)
    labels = np.where(allowed, seeds, 0)
    offsets = neighbor_offsets(conn)

    heap: list[tuple[float, int, int, int]] = []
    seq = 0
    for y, x in zip(*np.nonzero(labels)):
        heapq.heappush(heap, (float(relief[y, x]), seq, int(y), int(x)))
        seq += 1
    lab = labels.tolist()
    rel = relief.tolist()
    ok = allowed.tolist()
    while heap:
        _, _, y, x = heapq.heappop(heap)
        current = lab[y][x]
        for dy, dx in offsets:
            yy, xx = y + dy, x + dx
            if 0 <= yy < h and 0 <= xx < w and ok[yy][xx] and lab[yy][xx] == 0:
                lab[yy][xx] = current
                heapq.heappush(heap, (rel[yy][xx], seq, yy, xx))
                seq += 1
    return np.array(lab, dtype=np.int64)


def _components(fg: np.ndarray, conn) -> np.ndarray:
    h, w = fg.shape
    comp = np.zeros((h, w), dtype=np.int64)
    offsets = neighbor_offsets(conn)
    count = 0
    for y0, x0 in zip(*np.nonzero(fg)):
        if comp[y0, x0]:
            continue
        count += 1
        comp[y0, x0] = count
        stack = [(y0, x0)]
        while stack:
            y, x = stack.pop()
            for dy, dx in offsets:
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and fg[yy, xx] and not comp[yy, xx]:
                    comp[yy, xx] = count
                    stack.append((yy, xx))
    return comp


def find_peaks(distance: np.ndarray, fg: np.ndarray, min_distance: float, h: float, conn=Connectivity.EIGHT) -> np.ndarray:
    """Marker image of distance peaks at least ``min_distance`` apart.

    Candidate plateaus come from the h-maxima of ``distance`` inside ``fg``;
    they are visited from highest to lowest and kept when their
    representative pixel lies ``>= min_distance`` from every kept one. Each
    foreground component receives at least one marker.
    """
    d = np.where(fg, distance, 0.0)
    cand = h_maxima(d, h, conn) & fg
    plateaus = _components(cand, conn)
    reps = []
    for lab in range(1, int(plateaus.max()) + 1):
        ys, xs = np.nonzero(plateaus == lab)
        vals = d[ys, xs]
        k = int(np.argmax(vals))
        reps.append((-float(vals[k]), int(ys[k]), int(xs[k]), lab))
    reps.sort()
    kept = []
    for negv, y, x, lab in reps:
        if all(math.hypot(y - ky, x - kx) >= min_distance for _, ky, kx, _ in kept):
            kept.append((negv, y, x, lab))

    comps = _components(fg, conn)
    covered = {int(comps[y, x]) for _, y, x, _ in kept}
    extra = []
    for c in range(1, int(comps.max()) + 1):
        if c not in covered:
            ys, xs = np.nonzero(comps == c)
            k = int(np.argmax(d[ys, xs]))
            extra.append((int(ys[k]), int(xs[k])))

    seeds = np.zeros(d.shape, dtype=np.int64)
    ordered = sorted([(y, x, lab) for _, y, x, lab in kept] + [(y, x, 0) for y, x in extra])
    for n, (y, x, lab) in enumerate(ordered, start=1):
        if lab:
            seeds[plateaus == lab] = n
        else:
            seeds[y, x] = n
    return seeds


def split_overlapping(
    mask,
    peak_min_distance: float = DEFAULT_PEAK_MIN_DISTANCE,
    peak_h: float = DEFAULT_PEAK_H,
    conn=Connectivity.EIGHT,
):
    """Split touching blobs: distance transform, peak markers, watershed on -distance.

    Returns ``(labels, distance)``; labels are 1..n inside the mask and 0 outside.
    """
    fg = _binary(mask)
    if not fg.any():
        raise DegenerateError("mask has no foreground pixels")
    distance = distance_transform(fg.astype(np.int64))
    if not np.isfinite(distance).any():
        # no background anywhere: a single object filling the frame
        return fg.astype(np.int64), distance
    seeds = find_peaks(distance, fg, peak_min_distance, peak_h, conn)
    labels = watershed(-np.where(fg, distance, 0.0), seeds, conn, mask=fg.astype(np.int64))
    return labels, distance
