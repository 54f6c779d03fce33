"""Raster file formats: 8-bit PGM (P5 binary, P2 ASCII), PPM (P6) export, and F32 raw.

F32 raw layout: the ASCII header line ``IMGF32 <width> <height>\\n`` followed
by ``width * height`` little-endian IEEE float32 values in row-major order.
"""

from __future__ import annotations

import os
import re
from enum import Enum
from pathlib import Path

import numpy as np

from astroimg.core import as_image
from astroimg.errors import FormatError

__all__ = [
    "RasterFormat",
    "read_image",
    "write_image",
    "read_labels",
    "write_labels",
    "write_rgb",
    "format_for_path",
]

F32_MAGIC = b"IMGF32"


class RasterFormat(str, Enum):
    PGM = "pgm"  # binary P5
    PGM_ASCII = "pgm-ascii"  # P2
    F32 = "f32"


def format_for_path(path) -> RasterFormat:
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return RasterFormat.PGM
    if suffix in (".f32", ".raw"):
        return RasterFormat.F32
    raise FormatError(f"cannot infer raster format from extension {suffix!r} (use .pgm or .f32)")


_WS = b" \t\r\n\v\f"
_P2_TOKEN = re.compile(rb"\s*(\S+)")


def _pnm_header(data: bytes, count: int) -> tuple[list[int], int]:
    """Parse ``count`` integers after the 2-byte magic, skipping comments.

    Returns the integers and the offset of the single whitespace byte that
    terminates the header.
    """
    pos = 2
    values = []
    while len(values) < count:
        while pos < len(data) and (data[pos] in _WS or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < len(data) and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        token = data[start:pos]
        if not token:
            raise FormatError("truncated PNM header", start)
        if not token.isdigit():
            raise FormatError(f"expected an integer in PNM header, got {token[:16]!r}", start)
        values.append(int(token))
    if pos >= len(data) or data[pos] not in _WS:
        raise FormatError("PNM header must end with a whitespace byte", pos)
    return values, pos


def _read_pgm(data: bytes) -> np.ndarray:
    magic = data[:2]
    (width, height, maxval), end = _pnm_header(data, 3)
    if width < 1 or height < 1:
        raise FormatError(f"invalid PGM dimensions {width}x{height}", 2)
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}", 2)
    n = width * height
    if magic == b"P5":
        start = end + 1
        payload = data[start:start + n]
        if len(payload) < n:
            raise FormatError(f"truncated P5 payload: expected {n} bytes, found {len(payload)}", start + len(payload))
        pixels = np.frombuffer(payload, dtype=np.uint8)
    else:
        pixels = np.empty(n, dtype=np.uint8)
        pos = end
        for k in range(n):
            m = _P2_TOKEN.match(data, pos)
            if m is None:
                raise FormatError(f"truncated P2 payload: found {k} of {n} samples", len(data))
            token = m.group(1)
            if not token.isdigit() or int(token) > maxval:
                raise FormatError(f"invalid P2 sample {token[:16]!r}", m.start(1))
            pixels[k] = int(token)
            pos = m.end()
    return pixels.reshape(height, width).astype(np.float64) / 255.0


def _read_f32(data: bytes) -> np.ndarray:
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("F32 header line is not terminated", len(data))
    parts = data[:nl].split(b" ")
    if len(parts) != 3 or parts[0] != F32_MAGIC:
        raise FormatError("F32 header must read 'IMGF32 <width> <height>'", 0)
    try:
        width, height = int(parts[1]), int(parts[2])
    except ValueError:
        raise FormatError("F32 header dimensions are not integers", len(F32_MAGIC) + 1) from None
    if width < 1 or height < 1:
        raise FormatError(f"invalid F32 dimensions {width}x{height}", len(F32_MAGIC) + 1)
    start = nl + 1
    need = 4 * width * height
    payload = data[start:]
    if len(payload) < need:
        raise FormatError(f"truncated F32 payload: expected {need} bytes, found {len(payload)}", start + len(payload))
    if len(payload) > need:
        raise FormatError(f"F32 payload has {len(payload) - need} trailing bytes", start + need)
    return np.frombuffer(payload, dtype="<f4").reshape(height, width).astype(np.float64)


def _read_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] in (b"P5", b"P2"):
        return _read_pgm(data)
    if data.startswith(F32_MAGIC):
        return _read_f32(data)
    raise FormatError(f"unsupported magic {data[:6]!r}", 0)


def read_image(path) -> np.ndarray:
    """Read a PGM (values / 255) or F32 raster as a float64 image."""
    return _read_raw(path)


def _atomic_write(path, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _pgm_bytes(pixels: np.ndarray, ascii_: bool) -> bytes:
    h, w = pixels.shape
    if ascii_:
        lines = [f"P2\n{w} {h}\n255\n"]
        for row in pixels:
            lines.append(" ".join(str(int(v)) for v in row) + "\n")
        return "".join(lines).encode("ascii")
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.astype(np.uint8).tobytes()


def write_image(path, img, fmt: RasterFormat | str | None = None) -> None:
    """Write ``img``. PGM quantises ``round(clamp(v, 0, 1) * 255)``; F32 stores float32."""
    img = as_image(img, allow_nonfinite=True)
    fmt = format_for_path(path) if fmt is None else RasterFormat(fmt)
    if fmt is RasterFormat.F32:
        h, w = img.shape
        payload = f"IMGF32 {w} {h}\n".encode("ascii") + img.astype("<f4").tobytes()
    else:
        if not np.all(np.isfinite(img)):
            raise FormatError("PGM cannot store non-finite values")
        q = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
        payload = _pgm_bytes(q, fmt is RasterFormat.PGM_ASCII)
    _atomic_write(path, payload)


def write_labels(path, labels) -> None:
    """Write an integer label map. PGM stores raw label values (0..255)."""
    arr = np.asarray(labels)
    fmt = format_for_path(path)
    if fmt is RasterFormat.F32:
        write_image(path, arr.astype(np.float64), fmt)
        return
    if arr.min() < 0 or arr.max() > 255:
        raise FormatError("PGM label maps hold labels 0..255 only")
    _atomic_write(path, _pgm_bytes(arr.astype(np.uint8), ascii_=False))


def read_labels(path) -> np.ndarray:
    """Inverse of :func:`write_labels`."""
    img = _read_raw(path)
    data = Path(path).read_bytes()
    scale = 255.0 if data[:2] in (b"P5", b"P2") else 1.0
    return np.rint(img * scale).astype(np.int64)


def write_rgb(path, rgb) -> None:
    """Write a ``(h, w, 3)`` uint8 array as binary PPM (P6)."""
    arr = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = arr.shape
    _atomic_write(path, f"P6\n{w} {h}\n255\n".encode("ascii") + arr.tobytes())
