"""Dense-tensor arithmetic and seeded random streams.

Tensors are plain C-contiguous ``numpy.ndarray`` values in 64-bit float;
operations allocate fresh outputs and never mutate their inputs, so results
may be shared freely across workers. Checkpoints downcast to 32-bit at the
storage boundary only (see :mod:`dflab.models`).
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch

__all__ = ["RngStream", "matmul", "sigmoid", "glorot_init", "elementwise"]


class RngStream:
    """Named deterministic random stream.

    Two streams built from the same ``(seed, label)`` produce identical value
    sequences on every platform; distinct labels under one seed give
    statistically independent sequences. Each logical task owns its own
    stream (e.g. ``"init"``, ``"shuffle"``, ``"split"``), so consumers never
    perturb each other's draws.
    """

    def __init__(self, seed: int, label: str):
        if seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {seed}")
        self.seed = int(seed)
        self.label = label
        entropy = [self.seed, int.from_bytes(label.encode("utf-8"), "big")]
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label!r})"


def _as_matrix(t: np.ndarray, name: str) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2:
        raise DimensionMismatch(f"{name} must be rank-2, got rank {t.ndim}")
    return t


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two rank-2 tensors.

    Raises DimensionMismatch when the inner extents differ. The dense kernel
    accumulates in a fixed order, so repeated calls on one machine are
    bit-identical.
    """
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(
            f"inner extents differ: {a.shape[0]}x{a.shape[1]} @ {b.shape[0]}x{b.shape[1]}"
        )
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("matmul produced non-finite values")
    return out


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise logistic function 1 / (1 + exp(-x)).

    Evaluated branch-wise so large-magnitude inputs saturate without
    overflow; saturation at the extremes is exact (0.0 / 1.0), which the
    LSTM gate algebra relies on for carrying the cell state untouched.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def glorot_init(rows: int, cols: int, rng: RngStream) -> np.ndarray:
    """Uniform draw in [-L, L] with L = sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ValueError(f"extents must be >= 1, got {rows}x{cols}")
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def elementwise(a: np.ndarray, b: np.ndarray, kind: str) -> np.ndarray:
    """Combine two same-shape tensors elementwise: ``add``, ``sub`` or ``mul``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {list(a.shape)} vs {list(b.shape)}")
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    raise ValueError(f"unknown elementwise kind {kind!r}")
