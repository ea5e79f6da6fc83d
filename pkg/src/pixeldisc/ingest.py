"""Dataset ingestion: IDX (MNIST family) and CIFAR-10 binary parsing, plus
exact pixel-lattice histograms shared by density estimation, k-medoids and
neighborhood queries."""

from __future__ import annotations

import gzip
import hashlib
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .core import LATTICE_SIZE, LabeledDataset, ParseError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3 * 1024 channel-planar bytes
CIFAR_CLASSES = 10


@dataclass(frozen=True)
class PixelHistogram:
    """Exact frequency table over the pixel lattice.

    counts: (256,) for C=1 or (256**3,) flattened (index = r*65536 + g*256 + b)
    for C=3, always int64 so that full-corpus counts can never overflow.
    """

    channels: int
    counts: np.ndarray

    def __post_init__(self):
        expected = LATTICE_SIZE if self.channels == 1 else LATTICE_SIZE**3
        if self.channels not in (1, 3):
            raise ParseError(f"histogram channels must be 1 or 3, got {self.channels}")
        if self.counts.shape != (expected,) or self.counts.dtype != np.int64:
            raise ParseError(
                f"histogram counts must be int64 of shape ({expected},), got "
                f"{self.counts.dtype} {self.counts.shape}"
            )

    @property
    def total_count(self) -> int:
        return int(self.counts.sum())

    def nonzero_values(self) -> tuple[np.ndarray, np.ndarray]:
        """(values (n, C) int16, counts (n,) int64) for present pixel values,
        ordered by flattened lattice index."""
        idx = np.flatnonzero(self.counts)
        return unflatten_values(idx, self.channels), self.counts[idx]


def flatten_values(values: np.ndarray) -> np.ndarray:
    """(n, C) pixel rows -> flattened lattice indices.

    Accumulates channel by channel so full-corpus inputs never materialize
    more than two int64 temporaries at once.
    """
    v = np.asarray(values)
    if v.shape[1] == 1:
        return v[:, 0].astype(np.int64)
    keys = v[:, 0].astype(np.int64)
    keys <<= 16
    keys += v[:, 1].astype(np.int64) << 8
    keys += v[:, 2]
    return keys


def unflatten_values(idx: np.ndarray, channels: int) -> np.ndarray:
    """Flattened lattice indices -> (n, C) int16 pixel rows."""
    idx = np.asarray(idx, dtype=np.int64)
    if channels == 1:
        return idx.astype(np.int16)[:, None]
    r = idx // 65536
    g = (idx // 256) % 256
    b = idx % 256
    return np.stack([r, g, b], axis=1).astype(np.int16)


def _open_maybe_gzip(path):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise ParseError(f"truncated file while reading {what}: wanted {n} bytes, got {len(data)}")
    return data


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Parse an IDX image/label file pair into a dataset.

    Standard MNIST and Fashion-MNIST files yield 28x28 single-channel images;
    pixel bytes are used verbatim as lattice values. Gzipped files are
    recognized by their .gz suffix.
    """
    with _open_maybe_gzip(images_path) as f:
        magic, n_images, n_rows, n_cols = struct.unpack(">IIII", _read_exact(f, 16, "image header"))
        if magic != IDX_IMAGES_MAGIC:
            raise ParseError(
                f"bad magic in images file: got 0x{magic:08x}, want 0x{IDX_IMAGES_MAGIC:08x}"
            )
        raw = _read_exact(f, n_images * n_rows * n_cols, "image data")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(n_images, n_rows, n_cols, 1)
    with _open_maybe_gzip(labels_path) as f:
        magic, n_labels = struct.unpack(">II", _read_exact(f, 8, "label header"))
        if magic != IDX_LABELS_MAGIC:
            raise ParseError(
                f"bad magic in labels file: got 0x{magic:08x}, want 0x{IDX_LABELS_MAGIC:08x}"
            )
        labels = np.frombuffer(_read_exact(f, n_labels, "label data"), dtype=np.uint8)
    if n_images != n_labels:
        raise ParseError(f"image/label count mismatch: {n_images} images vs {n_labels} labels")
    num_classes = int(labels.max()) + 1 if n_labels else 1
    return LabeledDataset(images=images.copy(), labels=labels.astype(np.int64),
                          num_classes=num_classes)


def load_cifar10(batch_paths) -> LabeledDataset:
    """Parse CIFAR-10 binary batches (3073-byte records, channel-planar)."""
    images, labels = [], []
    for path in batch_paths:
        with _open_maybe_gzip(path) as f:
            raw = f.read()
        if len(raw) % CIFAR_RECORD_BYTES != 0:
            raise ParseError(
                f"{path}: file length {len(raw)} is not a multiple of {CIFAR_RECORD_BYTES}"
            )
        n = len(raw) // CIFAR_RECORD_BYTES
        if n == 0:
            warnings.warn(f"{path}: empty CIFAR-10 batch")
            continue
        records = np.frombuffer(raw, dtype=np.uint8).reshape(n, CIFAR_RECORD_BYTES)
        batch_labels = records[:, 0]
        if batch_labels.max() >= CIFAR_CLASSES:
            bad = int(batch_labels.max())
            raise ParseError(f"{path}: label out of range: {bad} (labels are 0-9)")
        # planar (n, 3, 32, 32) -> interleaved (n, 32, 32, 3)
        planes = records[:, 1:].reshape(n, 3, 32, 32)
        images.append(planes.transpose(0, 2, 3, 1).copy())
        labels.append(batch_labels)
    if not images:
        return LabeledDataset(images=np.zeros((0, 32, 32, 3), dtype=np.uint8),
                              labels=np.zeros((0,), dtype=np.int64),
                              num_classes=CIFAR_CLASSES)
    return LabeledDataset(images=np.concatenate(images),
                          labels=np.concatenate(labels).astype(np.int64),
                          num_classes=CIFAR_CLASSES)


def save_idx(ds: LabeledDataset, images_path, labels_path) -> None:
    """Write a single-channel dataset back out as an IDX file pair."""
    if ds.channels != 1:
        raise ParseError("IDX output requires single-channel images")
    n, h, w, _ = ds.images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, h, w))
        f.write(ds.images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        f.write(ds.labels.astype(np.uint8).tobytes())


def save_cifar10(ds: LabeledDataset, path) -> None:
    """Write an RGB 32x32 dataset as one CIFAR-10 binary batch."""
    if ds.image_shape != (32, 32, 3):
        raise ParseError(f"CIFAR-10 output requires 32x32x3 images, got {ds.image_shape}")
    planes = ds.images.transpose(0, 3, 1, 2).reshape(len(ds), 3072)
    records = np.concatenate([ds.labels.astype(np.uint8)[:, None], planes], axis=1)
    with open(path, "wb") as f:
        f.write(records.tobytes())


def build_histogram(ds: LabeledDataset) -> PixelHistogram:
    """Exact frequency of each distinct pixel value across the dataset."""
    c = ds.channels
    size = LATTICE_SIZE if c == 1 else LATTICE_SIZE**3
    flat = ds.images.reshape(-1, c)
    if len(flat) == 0:
        return PixelHistogram(channels=c, counts=np.zeros(size, dtype=np.int64))
    keys = flatten_values(flat)
    counts = np.bincount(keys, minlength=size).astype(np.int64)
    return PixelHistogram(channels=c, counts=counts)


def dataset_digest(ds: LabeledDataset) -> str:
    """Byte-deterministic digest of a dataset (shape + pixels + labels)."""
    h = hashlib.sha256()
    h.update(np.asarray(ds.images.shape, dtype=np.int64).tobytes())
    h.update(ds.images.tobytes())
    h.update(ds.labels.astype(np.int64).tobytes())
    return h.hexdigest()


def filter_min_intensity(ds: LabeledDataset, threshold: float) -> LabeledDataset:
    """Drop images whose mean channel value is below the threshold.

    Exposed for corpora with very dark images; the standard MNIST/CIFAR-10
    pipelines do not use it.
    """
    if len(ds) == 0:
        return ds
    means = ds.images.reshape(len(ds), -1).mean(axis=1)
    keep = means >= threshold
    return LabeledDataset(images=ds.images[keep], labels=ds.labels[keep],
                          num_classes=ds.num_classes)
