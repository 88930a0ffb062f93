"""Shared fixtures: in-memory image encoding and small dataset trees."""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def encode_png(arr: np.ndarray) -> bytes:
    """uint8 array (H, W) or (H, W, 3) -> PNG bytes."""
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def encode_jpeg(arr: np.ndarray, quality: int = 95) -> bytes:
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def write_tree(root: Path, n_real: int, n_fake: int, size: int = 8, seed: int = 7) -> Path:
    """Class tree of constant-brightness PNGs: real bright, fake dark.

    The two classes are linearly separable by mean brightness, which makes
    the tree double as the training sanity fixture.
    """
    rng = np.random.default_rng(seed)
    (root / "real").mkdir(parents=True, exist_ok=True)
    (root / "fake").mkdir(parents=True, exist_ok=True)
    for i in range(n_real):
        value = int(rng.integers(200, 256))
        arr = np.full((size, size), value, dtype=np.uint8)
        (root / "real" / f"r{i:04d}.png").write_bytes(encode_png(arr))
    for i in range(n_fake):
        value = int(rng.integers(0, 56))
        arr = np.full((size, size), value, dtype=np.uint8)
        (root / "fake" / f"f{i:04d}.png").write_bytes(encode_png(arr))
    return root


@pytest.fixture
def small_tree(tmp_path: Path) -> Path:
    return write_tree(tmp_path / "data", n_real=4, n_fake=4)


@pytest.fixture
def separable_tree(tmp_path: Path) -> Path:
    return write_tree(tmp_path / "data", n_real=100, n_fake=100)
