"""Dataset generation and ingestion.

Generated datasets are pure functions of their spec (seed included), so a
spec reproduces identical bytes on every machine.  Two file formats are
ingested: plain CSV (one example per row, label last) and the big-endian
magic/dims IDX format, so real digit datasets can be run optionally.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, IngestionError

DATASET_KINDS = ("random-label", "gaussian-blobs", "csv-file", "idx-file")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    n: int = 0
    d: int = 0
    num_classes: int = 2
    seed: int = 0
    split_fraction: float = 0.8
    separation: float = 8.0
    noise: float = 1.0
    path: str | None = None
    labels_path: str | None = None

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigurationError(
                f"unknown dataset kind {self.kind!r}; expected one of {DATASET_KINDS}")
        if not 0.0 < self.split_fraction <= 1.0:
            raise ConfigurationError("split_fraction must lie in (0, 1]")


@dataclass
class Dataset:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray

    @property
    def num_classes(self) -> int:
        labels = self.y_train if self.y_test.size == 0 else np.concatenate(
            [self.y_train, self.y_test])
        return int(labels.max()) + 1 if labels.size else 0

    @property
    def dim(self) -> int:
        return self.X_train.shape[1]

    def class_counts(self) -> dict:
        values, counts = np.unique(self.y_train, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}


def _split(X: np.ndarray, y: np.ndarray, fraction: float,
           rng: np.random.Generator) -> Dataset:
    n = X.shape[0]
    order = rng.permutation(n)
    cut = int(round(n * fraction))
    train, test = order[:cut], order[cut:]
    return Dataset(X[train], y[train], X[test], y[test])


def blob_means(num_classes: int, d: int, separation: float) -> np.ndarray:
    """Axis-aligned class centers at +-separation along distinct axes."""
    if num_classes > 2 * d:
        raise ConfigurationError(
            f"{num_classes} blob classes need dimension >= {(num_classes + 1) // 2}")
    means = np.zeros((num_classes, d))
    for c in range(num_classes):
        axis, sign = divmod(c, 2)
        means[c, axis] = separation * (1.0 if sign == 0 else -1.0)
    return means


def make_dataset(spec: DatasetSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "random-label":
        if spec.n < 1 or spec.d < 1 or spec.num_classes < 2:
            raise ConfigurationError("random-label needs n, d, num_classes")
        X = rng.standard_normal((spec.n, spec.d))
        y = rng.integers(0, spec.num_classes, spec.n)
        return _split(X, y, spec.split_fraction, rng)
    if spec.kind == "gaussian-blobs":
        if spec.n < 1 or spec.d < 1 or spec.num_classes < 2:
            raise ConfigurationError("gaussian-blobs needs n, d, num_classes")
        means = blob_means(spec.num_classes, spec.d, spec.separation)
        y = rng.permutation(np.arange(spec.n) % spec.num_classes)
        X = means[y] + spec.noise * rng.standard_normal((spec.n, spec.d))
        return _split(X, y, spec.split_fraction, rng)
    if spec.kind == "csv-file":
        X, y = read_labeled_csv(spec.path)
        return _split(X, y, spec.split_fraction, rng)
    X = read_idx_images(spec.path)
    y = read_idx_labels(spec.labels_path)
    if X.shape[0] != y.shape[0]:
        raise IngestionError(
            f"idx pair mismatch: {X.shape[0]} images vs {y.shape[0]} labels")
    return _split(X, y, spec.split_fraction, rng)


def read_labeled_csv(path) -> tuple:
    """Rows of "v1,...,vd,label"; errors carry the byte offset."""
    if path is None:
        raise ConfigurationError("csv-file dataset needs a path")
    rows, labels = [], []
    offset = 0
    width = None
    with open(path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            text = raw.decode("utf-8", errors="replace").strip()
            if text:
                parts = text.split(",")
                try:
                    values = [float(v) for v in parts[:-1]]
                    label = int(parts[-1])
                except ValueError as exc:
                    raise IngestionError(
                        f"{path}: malformed row at line {line_no} "
                        f"(byte offset {offset}): {exc}") from None
                if width is None:
                    width = len(values)
                elif len(values) != width:
                    raise IngestionError(
                        f"{path}: row at line {line_no} (byte offset {offset}) "
                        f"has {len(values)} features, expected {width}")
                if not values:
                    raise IngestionError(
                        f"{path}: row at line {line_no} (byte offset {offset}) "
                        "has no feature columns")
                rows.append(values)
                labels.append(label)
            offset += len(raw)
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64), np.asarray(labels, dtype=np.int64)


_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def read_idx_images(path) -> np.ndarray:
    if path is None:
        raise ConfigurationError("idx-file dataset needs a path")
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise IngestionError(f"{path}: truncated idx header (byte offset 0)")
    magic, count, rows, cols = struct.unpack(">IIII", blob[:16])
    if magic != _IDX_IMAGES_MAGIC:
        raise IngestionError(
            f"{path}: bad idx image magic 0x{magic:08x} (byte offset 0)")
    expected = 16 + count * rows * cols
    if len(blob) != expected:
        raise IngestionError(
            f"{path}: expected {expected} bytes, found {len(blob)} "
            f"(byte offset {min(expected, len(blob))})")
    data = np.frombuffer(blob, dtype=np.uint8, offset=16)
    return data.reshape(count, rows * cols).astype(np.float64) / 255.0


def read_idx_labels(path) -> np.ndarray:
    if path is None:
        raise ConfigurationError("idx-file dataset needs a labels_path")
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise IngestionError(f"{path}: truncated idx header (byte offset 0)")
    magic, count = struct.unpack(">II", blob[:8])
    if magic != _IDX_LABELS_MAGIC:
        raise IngestionError(
            f"{path}: bad idx label magic 0x{magic:08x} (byte offset 0)")
    if len(blob) != 8 + count:
        raise IngestionError(
            f"{path}: expected {8 + count} bytes, found {len(blob)} "
            f"(byte offset {min(8 + count, len(blob))})")
    return np.frombuffer(blob, dtype=np.uint8, offset=8).astype(np.int64)
