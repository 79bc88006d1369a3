"""Binary PPM (P6, 8-bit) codec and bilinear resize for float images in [0, 1]."""
from __future__ import annotations

from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    pass


def _tokens(data: bytes, count: int):
    """First `count` whitespace-separated header tokens, skipping # comments."""
    out, i, n = [], 0, len(data)
    while len(out) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i >= n:
            raise ImageFormatError("truncated PPM header")
        if data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace():
            j += 1
        out.append(data[i:j])
        i = j
    # exactly one whitespace byte separates header from raster
    return out, i + 1


def decode_ppm(data: bytes) -> np.ndarray:
    """Decode P6 bytes to a (H, W, 3) uint8 array."""
    (magic, w, h, maxval), start = _tokens(data, 4)
    if magic != b"P6":
        raise ImageFormatError(f"unsupported magic {magic!r}, expected P6")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise ImageFormatError("malformed PPM header") from exc
    if w < 1 or h < 1:
        raise ImageFormatError("empty image")
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 is supported, got {maxval}")
    size = w * h * 3
    raster = data[start:start + size]
    if len(raster) != size:
        raise ImageFormatError(f"expected {size} raster bytes, found {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)


def encode_ppm(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise ImageFormatError("encode_ppm expects a (H, W, 3) uint8 array")
    h, w, _ = pixels.shape
    return f"P6\n{w} {h}\n255\n".encode() + np.ascontiguousarray(pixels).tobytes()


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_uint8(pixels: np.ndarray) -> np.ndarray:
    return pixels.astype(np.float64) / 255.0


def quantize(img: np.ndarray) -> np.ndarray:
    """Snap to the 8-bit grid so images survive a PPM round trip unchanged."""
    return from_uint8(to_uint8(img))


def read_ppm(path) -> np.ndarray:
    return from_uint8(decode_ppm(Path(path).read_bytes()))


def write_ppm(path, img: np.ndarray):
    Path(path).write_bytes(encode_ppm(to_uint8(img)))


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() not in (".ppm", ".pnm"):
        raise ImageFormatError(f"unsupported image format: {path.suffix or path.name}")
    return read_ppm(path)


def _axis_weights(n_in: int, n_out: int):
    # pixel-center alignment: src = (dst + 0.5) * n_in / n_out - 0.5
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize_bilinear(img: np.ndarray, height: int, width: int) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    if (h, w) == (height, width):
        return img.copy()
    y0, y1, fy = _axis_weights(h, height)
    x0, x1, fx = _axis_weights(w, width)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy
