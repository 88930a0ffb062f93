"""Image decoding and the fixed preprocessing chain.

The chain is always: decode -> grayscale -> central zoom -> resize ->
scale to [0, 1]. Every stage is a pure function of its input, so images may
be preprocessed concurrently in any order.
"""
from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ChannelError, DecodeError, InvalidZoom

__all__ = [
    "ImageBuffer",
    "PreprocessConfig",
    "decode_image",
    "to_grayscale",
    "central_zoom",
    "resize_bilinear",
    "resize_nearest",
    "to_input_tensor",
    "preprocess",
]


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit image with flat row-major pixel bytes (1 or 3 channels)."""

    height: int
    width: int
    channels: int
    pixels: bytes

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ChannelError(f"channels must be 1 or 3, got {self.channels}")
        expected = self.height * self.width * self.channels
        if len(self.pixels) != expected:
            raise ChannelError(
                f"pixel buffer has {len(self.pixels)} bytes, expected {expected}"
            )

    def array(self) -> np.ndarray:
        """Pixels as a (height, width, channels) uint8 array."""
        a = np.frombuffer(self.pixels, dtype=np.uint8)
        return a.reshape(self.height, self.width, self.channels)


def _from_array(a: np.ndarray) -> ImageBuffer:
    h, w, c = a.shape
    return ImageBuffer(h, w, c, np.ascontiguousarray(a, dtype=np.uint8).tobytes())


def decode_image(data: bytes) -> ImageBuffer:
    """Decode a PNG or JPEG byte stream into a 3-channel buffer.

    Grayscale and palette sources are expanded to three equal channels.
    Raises DecodeError on malformed or truncated input.
    """
    try:
        with Image.open(io.BytesIO(data)) as im:
            im = im.convert("RGB")
            im.load()
            arr = np.asarray(im, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise DecodeError(f"cannot decode image: {e}") from e
    return _from_array(arr)


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """Collapse RGB to luminance: round(0.299 R + 0.587 G + 0.114 B).

    Idempotent: single-channel input is returned unchanged.
    """
    if img.channels == 1:
        return img
    rgb = img.array().astype(np.float64)
    lum = rgb[:, :, 0] * 0.299 + rgb[:, :, 1] * 0.587 + rgb[:, :, 2] * 0.114
    gray = np.floor(lum + 0.5).astype(np.uint8)  # round half up
    return _from_array(gray[:, :, np.newaxis])


def central_zoom(img: ImageBuffer, zoom: float) -> ImageBuffer:
    """Crop the centered window that keeps a (1 - zoom) fraction per axis.

    Output extents are floor((1 - zoom) * extent); the window offset is
    floor((extent - kept) / 2). Pixels are copied verbatim.
    """
    if not (0.0 <= zoom < 1.0):
        raise InvalidZoom(f"zoom must lie in [0, 1), got {zoom}")
    if zoom == 0.0:
        return img
    h2 = math.floor((1.0 - zoom) * img.height)
    w2 = math.floor((1.0 - zoom) * img.width)
    top = (img.height - h2) // 2
    left = (img.width - w2) // 2
    a = img.array()[top : top + h2, left : left + w2]
    return _from_array(a)


def _sample_axis(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel-centered source coordinates with edge clamping.
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    lo = np.floor(src).astype(np.int64)
    frac = src - lo
    lo_c = np.clip(lo, 0, n_in - 1)
    hi_c = np.clip(lo + 1, 0, n_in - 1)
    return lo_c, hi_c, frac


def resize_bilinear(img: ImageBuffer, out_h: int, out_w: int) -> ImageBuffer:
    """Resize via half-pixel-centered bilinear interpolation."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target extents must be >= 1, got {out_h}x{out_w}")
    if out_h == img.height and out_w == img.width:
        return img
    a = img.array().astype(np.float64)
    y0, y1, fy = _sample_axis(img.height, out_h)
    x0, x1, fx = _sample_axis(img.width, out_w)
    fy = fy[:, np.newaxis, np.newaxis]
    fx = fx[np.newaxis, :, np.newaxis]
    top = a[y0][:, x0] * (1.0 - fx) + a[y0][:, x1] * fx
    bot = a[y1][:, x0] * (1.0 - fx) + a[y1][:, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    out = np.floor(out + 0.5).astype(np.uint8)
    return _from_array(out)


def resize_nearest(img: ImageBuffer, out_h: int, out_w: int) -> ImageBuffer:
    """Nearest-neighbor resize with the same half-pixel source grid."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target extents must be >= 1, got {out_h}x{out_w}")
    if out_h == img.height and out_w == img.width:
        return img
    a = img.array()
    ys = np.minimum(
        ((np.arange(out_h) + 0.5) * (img.height / out_h)).astype(np.int64), img.height - 1
    )
    xs = np.minimum(
        ((np.arange(out_w) + 0.5) * (img.width / out_w)).astype(np.int64), img.width - 1
    )
    return _from_array(a[ys][:, xs])


def to_input_tensor(img: ImageBuffer) -> np.ndarray:
    """Grayscale buffer -> float tensor of shape (H, W, 1) with values in [0, 1]."""
    if img.channels != 1:
        raise ChannelError(f"expected 1-channel input, got {img.channels} channels")
    return img.array().astype(np.float64) / 255.0


@dataclass(frozen=True)
class PreprocessConfig:
    """Parameters of the preprocessing chain; output shape is (out_h, out_w, 1)."""

    zoom: float = 0.2
    out_h: int = 64
    out_w: int = 64
    method: str = "bilinear"  # or "nearest", for exactness tests

    def __post_init__(self):
        if not (0.0 <= self.zoom < 1.0):
            raise InvalidZoom(f"zoom must lie in [0, 1), got {self.zoom}")
        if self.out_h < 1 or self.out_w < 1:
            raise ValueError("target extents must be >= 1")
        if self.method not in ("bilinear", "nearest"):
            raise ValueError(f"unknown resize method {self.method!r}")

    def digest(self) -> str:
        """Stable short hash, used to key on-disk tensor caches."""
        key = f"{self.zoom!r}|{self.out_h}|{self.out_w}|{self.method}"
        return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


def preprocess(data: bytes, cfg: PreprocessConfig) -> np.ndarray:
    """Full chain: decode -> grayscale -> central zoom -> resize -> [0,1] tensor."""
    img = to_grayscale(decode_image(data))
    img = central_zoom(img, cfg.zoom)
    resize = resize_bilinear if cfg.method == "bilinear" else resize_nearest
    img = resize(img, cfg.out_h, cfg.out_w)
    return to_input_tensor(img)
