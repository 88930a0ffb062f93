"""Dataset cataloguing, stratified splitting, and batch streaming.

A manifest is the single source of truth for what gets trained and
evaluated: one record per image file, a class label, and a train/test
assignment. Records are ordered lexicographically by path before any
seeded shuffling, so a manifest rebuilt from the same tree is identical
regardless of directory-walk order.
"""
from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import __version__ as _tool_version
from .errors import DatasetIOError, DflError, EmptyClassError, FormatError
from .imaging import PreprocessConfig, preprocess
from .numerics import RngStream

__all__ = [
    "LABEL_REAL",
    "LABEL_FAKE",
    "LABEL_NAMES",
    "SampleRecord",
    "Manifest",
    "Batch",
    "scan_dataset",
    "stratified_split",
    "batch_iter",
    "write_manifest",
    "read_manifest",
]

LABEL_REAL = 0
LABEL_FAKE = 1
LABEL_NAMES = {LABEL_REAL: "real", LABEL_FAKE: "fake"}
_LABEL_VALUES = {"real": LABEL_REAL, "fake": LABEL_FAKE}

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


@dataclass(frozen=True)
class SampleRecord:
    path: str
    label: int  # 0 = real, 1 = fake
    split: str | None = None  # "train" | "test" | None before splitting


@dataclass(frozen=True)
class Manifest:
    """Ordered catalog of labeled samples, optionally split."""

    records: tuple[SampleRecord, ...]
    seed: int | None = None

    def counts(self) -> dict[tuple[int, str | None], int]:
        """Tally of records per (label, split)."""
        out: dict[tuple[int, str | None], int] = {}
        for r in self.records:
            key = (r.label, r.split)
            out[key] = out.get(key, 0) + 1
        return out

    def subset(self, split: str) -> tuple[SampleRecord, ...]:
        return tuple(r for r in self.records if r.split == split)


@dataclass(frozen=True)
class Batch:
    """Stack of preprocessed images (B, H, W) with their 0/1 labels."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 3 or self.inputs.shape[0] < 1:
            raise ValueError(f"inputs must be (B, H, W) with B >= 1, got {self.inputs.shape}")
        if len(self.labels) != self.inputs.shape[0]:
            raise ValueError("labels length must equal the batch extent")


def _class_files(class_dir: Path) -> list[str]:
    if not class_dir.is_dir():
        raise DatasetIOError(f"missing class directory: {class_dir}")
    try:
        files = [
            str(p)
            for p in class_dir.rglob("*")
            if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
        ]
    except OSError as e:
        raise DatasetIOError(f"cannot read {class_dir}: {e}") from e
    return files


def scan_dataset(root: str | Path, real_dir: str = "real", fake_dir: str = "fake") -> Manifest:
    """Catalog a two-class image tree into an unsplit manifest.

    Labels come from the subdirectory; records are sorted lexicographically
    by path. Raises EmptyClassError when either class has no image files.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetIOError(f"missing dataset root: {root}")
    for sub in (real_dir, fake_dir):
        if not (root / sub).is_dir():
            raise DatasetIOError(f"missing class directory: {root / sub}")
    records: list[SampleRecord] = []
    for sub, label in ((real_dir, LABEL_REAL), (fake_dir, LABEL_FAKE)):
        files = _class_files(root / sub)
        if not files:
            raise EmptyClassError(f"no image files under class directory: {root / sub}")
        records.extend(SampleRecord(p, label) for p in files)
    records.sort(key=lambda r: r.path)
    return Manifest(tuple(records))


def stratified_split(m: Manifest, train_fraction: float, seed: int) -> Manifest:
    """Assign train/test per class: floor(fraction * n) of each label trains.

    The shuffle is seeded, so the assignment is reproducible; record order
    (lexicographic by path) is preserved in the returned manifest.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = RngStream(seed, "split")
    splits: list[str | None] = [None] * len(m.records)
    for label in sorted({r.label for r in m.records}):
        idx = [i for i, r in enumerate(m.records) if r.label == label]
        order = rng.permutation(len(idx))
        n_train = int(np.floor(train_fraction * len(idx)))
        for rank, j in enumerate(order):
            splits[idx[j]] = "train" if rank < n_train else "test"
    records = tuple(replace(r, split=s) for r, s in zip(m.records, splits))
    return Manifest(records, seed=seed)


def _load_one(record: SampleRecord, pp: PreprocessConfig, cache_dir: Path | None) -> np.ndarray:
    if cache_dir is not None:
        key = hashlib.sha256(f"{record.path}|{pp.digest()}".encode("utf-8")).hexdigest()
        cache_file = cache_dir / f"{key}.npy"
        if cache_file.exists():
            return np.load(cache_file)
    try:
        data = Path(record.path).read_bytes()
    except OSError as e:
        raise DatasetIOError(f"{record.path}: {e}") from e
    try:
        tensor = preprocess(data, pp)
    except DflError as e:
        raise type(e)(f"{record.path}: {e}") from e
    if cache_dir is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        tmp = cache_file.with_suffix(".tmp")
        with open(tmp, "wb") as fh:  # np.save would append .npy to a bare path
            np.save(fh, tensor)
        os.replace(tmp, cache_file)
    return tensor


def _worker_count() -> int:
    raw = os.environ.get("DFL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def batch_iter(
    m: Manifest,
    split: str,
    batch_size: int,
    shuffle_seed: int,
    pp: PreprocessConfig,
    *,
    epoch: int = 0,
    cache_dir: str | Path | None = None,
    workers: int | None = None,
) -> Iterator[Batch]:
    """Stream preprocessed batches covering the split exactly once.

    Train order is a fresh seeded permutation per epoch; test order is the
    fixed manifest order. The final short batch is emitted. Preprocessing may
    run on DFL_THREADS workers, but batch contents are identical to the
    serial schedule (the worker pool preserves submission order).
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    records = m.subset(split)
    if not records:
        raise EmptyClassError(f"manifest has no records in split {split!r}")
    if split == "train":
        order = RngStream(shuffle_seed, f"shuffle/epoch{epoch}").permutation(len(records))
        records = tuple(records[i] for i in order)
    cache = Path(cache_dir) if cache_dir is not None else None
    nworkers = _worker_count() if workers is None else max(1, workers)

    def emit(chunk: Sequence[SampleRecord], tensors: list[np.ndarray]) -> Batch:
        inputs = np.stack([t[:, :, 0] for t in tensors])
        labels = np.array([r.label for r in chunk], dtype=np.int64)
        return Batch(inputs, labels)

    if nworkers == 1:
        for start in range(0, len(records), batch_size):
            chunk = records[start : start + batch_size]
            yield emit(chunk, [_load_one(r, pp, cache) for r in chunk])
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            for start in range(0, len(records), batch_size):
                chunk = records[start : start + batch_size]
                tensors = list(pool.map(lambda r: _load_one(r, pp, cache), chunk))
                yield emit(chunk, tensors)


def write_manifest(m: Manifest, path: str | Path) -> None:
    """Write the manifest as UTF-8 CSV with LF endings.

    Comment lines record the split seed and tool version; the header is
    ``path,label,split`` with label in {real,fake} and split in {train,test}.
    """
    lines = [f"# dflab {_tool_version}", f"# seed={m.seed}"]
    lines.append("path,label,split")
    for r in m.records:
        if r.split is None:
            raise ValueError("cannot write a manifest before splitting")
        lines.append(f"{r.path},{LABEL_NAMES[r.label]},{r.split}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def read_manifest(path: str | Path) -> Manifest:
    """Parse a manifest CSV written by :func:`write_manifest`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"cannot read manifest {path}: {e}") from e
    seed: int | None = None
    records: list[SampleRecord] = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().startswith("seed="):
                raw = line.split("=", 1)[1].strip()
                seed = None if raw == "None" else int(raw)
            continue
        if not header_seen:
            if line != "path,label,split":
                raise FormatError(f"{path}:{lineno}: unexpected manifest header {line!r}")
            header_seen = True
            continue
        parts = line.rsplit(",", 2)
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: malformed manifest row {line!r}")
        p, label, split = parts
        if label not in _LABEL_VALUES:
            raise FormatError(f"{path}:{lineno}: unknown label {label!r}")
        if split not in ("train", "test"):
            raise FormatError(f"{path}:{lineno}: unknown split {split!r}")
        records.append(SampleRecord(p, _LABEL_VALUES[label], split))
    if not header_seen:
        raise FormatError(f"{path}: missing manifest header")
    return Manifest(tuple(records), seed=seed)
