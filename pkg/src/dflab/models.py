"""The two classifier architectures and their on-disk checkpoint format.

MLP: flatten -> dense(units) -> dense(units // 2) -> dense(1), all sigmoid.
LSTM: one recurrent layer consuming each image as a top-to-bottom sequence
of pixel rows, then a dense sigmoid head on the final hidden state.

Both forward passes are pure functions of (Parameters, Batch); training owns
the only mutable copy of the parameters and hands immutable snapshots to
evaluators.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .datasets import Batch
from .errors import ChecksumError, FormatError, ShapeError
from .numerics import RngStream, glorot_init, matmul, sigmoid

__all__ = [
    "ModelSpec",
    "Parameters",
    "LstmState",
    "init_params",
    "zero_params",
    "expected_shapes",
    "mlp_forward",
    "lstm_cell_step",
    "lstm_forward",
    "forward",
    "predict_label",
    "save_checkpoint",
    "load_checkpoint",
]

Parameters = dict  # name -> np.ndarray, in a fixed architecture-defined order

_MAGIC = b"DFL1"
_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; the learnable tensors live in Parameters."""

    kind: str  # "mlp" | "lstm"
    input_h: int
    input_w: int
    mlp_units: int = 128  # first dense width; the second layer uses half
    lstm_hidden: int = 64
    activation: str = "sigmoid"

    def __post_init__(self):
        if self.kind not in ("mlp", "lstm"):
            raise ValueError(f"kind must be 'mlp' or 'lstm', got {self.kind!r}")
        if self.input_h < 1 or self.input_w < 1:
            raise ValueError("input extents must be >= 1")
        if self.kind == "mlp" and self.mlp_units < 2:
            raise ValueError("mlp_units must be >= 2")
        if self.kind == "lstm" and self.lstm_hidden < 1:
            raise ValueError("lstm_hidden must be >= 1")
        if self.activation != "sigmoid":
            raise ValueError("only sigmoid activation is supported")


@dataclass
class LstmState:
    """Recurrent carry: hidden output h and cell state c, both (..., hidden)."""

    h: np.ndarray
    c: np.ndarray


def expected_shapes(spec: ModelSpec) -> dict[str, tuple[int, ...]]:
    """Parameter names and shapes dictated by the spec, in checkpoint order."""
    if spec.kind == "mlp":
        d = spec.input_h * spec.input_w
        u1 = spec.mlp_units
        u2 = spec.mlp_units // 2
        return {
            "w1": (d, u1), "b1": (u1,),
            "w2": (u1, u2), "b2": (u2,),
            "w3": (u2, 1), "b3": (1,),
        }
    z = spec.input_w + spec.lstm_hidden
    h = spec.lstm_hidden
    shapes: dict[str, tuple[int, ...]] = {}
    for gate in ("i", "f", "g", "o"):
        shapes[f"w_{gate}"] = (z, h)
    for gate in ("i", "f", "g", "o"):
        shapes[f"b_{gate}"] = (h,)
    shapes["w_y"] = (h, 1)
    shapes["b_y"] = (1,)
    return shapes


def init_params(spec: ModelSpec, rng: RngStream) -> Parameters:
    """Glorot-uniform weight matrices; zero biases, except forget bias = 1."""
    params: Parameters = {}
    for name, shape in expected_shapes(spec).items():
        if name.startswith("w"):
            params[name] = glorot_init(shape[0], shape[1], rng)
        elif name == "b_f":
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    return params


def zero_params(spec: ModelSpec) -> Parameters:
    """All-zero parameters; both architectures then output exactly 0.5."""
    return {name: np.zeros(shape) for name, shape in expected_shapes(spec).items()}


def _check_batch(spec: ModelSpec, batch: Batch) -> np.ndarray:
    x = np.asarray(batch.inputs, dtype=np.float64)
    if x.shape[1:] != (spec.input_h, spec.input_w):
        raise ShapeError(
            f"batch images are {x.shape[1]}x{x.shape[2]}, "
            f"spec expects {spec.input_h}x{spec.input_w}"
        )
    return x


def _check_params(spec: ModelSpec, p: Parameters) -> None:
    for name, shape in expected_shapes(spec).items():
        if name not in p:
            raise ShapeError(f"missing parameter tensor {name!r}")
        if tuple(p[name].shape) != shape:
            raise ShapeError(f"parameter {name!r} has shape {p[name].shape}, expected {shape}")


def mlp_forward(p: Parameters, batch: Batch, spec: ModelSpec) -> np.ndarray:
    """Per-sample probability of the fake class, shape (B,)."""
    x = _check_batch(spec, batch)
    _check_params(spec, p)
    flat = x.reshape(x.shape[0], -1)
    a1 = sigmoid(matmul(flat, p["w1"]) + p["b1"])
    a2 = sigmoid(matmul(a1, p["w2"]) + p["b2"])
    y = sigmoid(matmul(a2, p["w3"]) + p["b3"])
    return y[:, 0]


def lstm_cell_step(p: Parameters, x_t: np.ndarray, s: LstmState) -> LstmState:
    """One recurrent step over a single row (or a batch of rows).

    With z = [x_t, h_prev]:
        i = sig(z w_i + b_i)   f = sig(z w_f + b_f)
        g = sig(z w_g + b_g)   o = sig(z w_o + b_o)
        c = f * c_prev + i * g
        h = o * sig(c)

    The candidate and cell-output activations are sigmoid, matching the
    layer's fixed activation choice.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    single = x_t.ndim == 1
    if single:
        x_t = x_t[np.newaxis, :]
    h_prev = np.asarray(s.h, dtype=np.float64)
    c_prev = np.asarray(s.c, dtype=np.float64)
    if single:
        h_prev, c_prev = h_prev[np.newaxis, :], c_prev[np.newaxis, :]
    if x_t.shape[1] + h_prev.shape[1] != p["w_i"].shape[0]:
        raise ShapeError(
            f"row width {x_t.shape[1]} + hidden {h_prev.shape[1]} "
            f"does not match gate rows {p['w_i'].shape[0]}"
        )
    z = np.concatenate([x_t, h_prev], axis=1)
    i = sigmoid(matmul(z, p["w_i"]) + p["b_i"])
    f = sigmoid(matmul(z, p["w_f"]) + p["b_f"])
    g = sigmoid(matmul(z, p["w_g"]) + p["b_g"])
    o = sigmoid(matmul(z, p["w_o"]) + p["b_o"])
    c = f * c_prev + i * g
    h = o * sigmoid(c)
    if single:
        h, c = h[0], c[0]
    return LstmState(h=h, c=c)


def lstm_forward(p: Parameters, batch: Batch, spec: ModelSpec) -> np.ndarray:
    """Consume each image as H row-vectors (top row first); head on h_H."""
    x = _check_batch(spec, batch)
    _check_params(spec, p)
    b = x.shape[0]
    state = LstmState(
        h=np.zeros((b, spec.lstm_hidden)), c=np.zeros((b, spec.lstm_hidden))
    )
    for t in range(spec.input_h):
        state = lstm_cell_step(p, x[:, t, :], state)
    y = sigmoid(matmul(state.h, p["w_y"]) + p["b_y"])
    return y[:, 0]


def forward(spec: ModelSpec, p: Parameters, batch: Batch) -> np.ndarray:
    """Dispatch to the architecture named by the spec."""
    if spec.kind == "mlp":
        return mlp_forward(p, batch, spec)
    return lstm_forward(p, batch, spec)


def predict_label(prob, threshold: float = 0.5):
    """Hard 0/1 decision; probability ties go to the positive (fake) class."""
    arr = np.asarray(prob)
    out = (arr >= threshold).astype(np.int64)
    return int(out) if arr.ndim == 0 else out


def _canonical_spec_json(spec: ModelSpec) -> bytes:
    return json.dumps(asdict(spec), sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(spec: ModelSpec, p: Parameters, path: str | Path) -> None:
    """Write the bit-exact checkpoint format.

    Layout (all integers little-endian): magic "DFL1", u16 version, u32
    length-prefixed canonical spec JSON, then per tensor in architecture
    order: u32 name length + name, u8 rank, u32 extents, raw little-endian
    float32 data. A CRC-32 of everything preceding closes the file.
    """
    _check_params(spec, p)
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<H", _VERSION)
    spec_json = _canonical_spec_json(spec)
    blob += struct.pack("<I", len(spec_json))
    blob += spec_json
    for name in expected_shapes(spec):
        tensor = np.asarray(p[name], dtype=np.float64)
        name_b = name.encode("utf-8")
        blob += struct.pack("<I", len(name_b))
        blob += name_b
        blob += struct.pack("<B", tensor.ndim)
        for extent in tensor.shape:
            blob += struct.pack("<I", extent)
        blob += tensor.astype("<f4").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    Path(path).write_bytes(bytes(blob))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("checkpoint truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path: str | Path) -> tuple[ModelSpec, Parameters]:
    """Read and validate a checkpoint written by :func:`save_checkpoint`.

    Weights come back as float64 (within one float32 rounding of the saved
    values). Raises FormatError on bad magic/version, ChecksumError on CRC
    mismatch, ShapeError when tensors disagree with the spec header.
    """
    data = Path(path).read_bytes()
    if len(data) < 10:
        raise FormatError(f"{path}: too short to be a checkpoint")
    if data[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) != stored_crc:
        raise ChecksumError(f"{path}: CRC mismatch")
    r = _Reader(data[:-4])
    r.take(4)  # magic
    version = r.u16()
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    try:
        spec_raw = json.loads(r.take(r.u32()).decode("utf-8"))
        spec = ModelSpec(**spec_raw)
    except (ValueError, TypeError) as e:
        raise FormatError(f"{path}: malformed spec header: {e}") from e
    params: Parameters = {}
    for name, shape in expected_shapes(spec).items():
        got_name = r.take(r.u32()).decode("utf-8")
        if got_name != name:
            raise ShapeError(f"{path}: expected tensor {name!r}, found {got_name!r}")
        rank = r.u8()
        got_shape = tuple(r.u32() for _ in range(rank))
        if got_shape != shape:
            raise ShapeError(f"{path}: tensor {name!r} has shape {got_shape}, expected {shape}")
        count = int(np.prod(shape))
        raw = r.take(4 * count)
        params[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
    if r.pos != len(r.data):
        raise FormatError(f"{path}: trailing bytes after last tensor")
    return spec, params
