"""Shared domain types: the integer pixel lattice, distance metrics, codebooks.

All pixel arithmetic happens on the integer lattice {0..255}^C with C in
{1, 3}. Budgets given on the [0, 1] scale must be multiplied by 255 before
they reach this layer (helpers in :mod:`pixeldisc.cli` do that).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

LATTICE_MAX = 255
LATTICE_SIZE = 256


class PixeldiscError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(PixeldiscError):
    """Shape or channel-count mismatch between values that must agree."""


class ParseError(PixeldiscError):
    """Malformed input file (bad magic, truncation, inconsistent counts)."""


class ConfigError(PixeldiscError):
    """Invalid configuration value."""


class Metric(str, Enum):
    LINF = "linf"
    L1 = "l1"
    L2 = "l2"


def as_pixel(values) -> np.ndarray:
    """Validate and return a pixel as an int16 channel vector."""
    p = np.atleast_1d(np.asarray(values))
    if p.ndim != 1 or p.shape[0] not in (1, 3):
        raise StructuralError(f"pixel must have 1 or 3 channels, got shape {p.shape}")
    if not np.issubdtype(p.dtype, np.integer):
        raise StructuralError(f"pixel channels must be integers, got dtype {p.dtype}")
    if p.min() < 0 or p.max() > LATTICE_MAX:
        raise StructuralError(f"pixel channels outside 0..{LATTICE_MAX}: {p.tolist()}")
    return p.astype(np.int16)


def distance(p, q, metric: Metric = Metric.LINF) -> float:
    """Distance between two pixels under the given metric.

    Channel values are integers; the result is a real number (exact for
    linf/l1, sqrt of an integer for l2).
    """
    pa, qa = as_pixel(p), as_pixel(q)
    if pa.shape[0] != qa.shape[0]:
        raise StructuralError(
            f"channel-count mismatch: {pa.shape[0]} vs {qa.shape[0]}"
        )
    diff = np.abs(pa.astype(np.int32) - qa.astype(np.int32))
    if metric == Metric.LINF:
        return float(diff.max())
    if metric == Metric.L1:
        return float(diff.sum())
    return math.sqrt(float((diff * diff).sum()))


def distances_to_codes(pixels: np.ndarray, codes: np.ndarray,
                       metric: Metric = Metric.LINF) -> np.ndarray:
    """Distance matrix between pixel rows and code rows.

    pixels: (n, C) integer array; codes: (k, C) integer array.
    Returns float64 (n, k).
    """
    p = np.asarray(pixels, dtype=np.int32)
    c = np.asarray(codes, dtype=np.int32)
    if p.ndim == 1:
        p = p[None, :]
    if p.shape[1] != c.shape[1]:
        raise StructuralError(
            f"channel-count mismatch: pixels {p.shape[1]} vs codes {c.shape[1]}"
        )
    diff = np.abs(p[:, None, :] - c[None, :, :])
    if metric == Metric.LINF:
        return diff.max(axis=2).astype(np.float64)
    if metric == Metric.L1:
        return diff.sum(axis=2).astype(np.float64)
    return np.sqrt((diff.astype(np.float64) ** 2).sum(axis=2))


@dataclass(frozen=True)
class Image:
    """One image on the pixel lattice, stored as an (H, W, C) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        a = self.pixels
        if a.ndim != 3 or a.shape[2] not in (1, 3):
            raise StructuralError(f"image must be (H, W, C) with C in {{1, 3}}, got {a.shape}")
        if a.dtype != np.uint8:
            raise StructuralError(f"image dtype must be uint8, got {a.dtype}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def num_pixels(self) -> int:
        return self.pixels.shape[0] * self.pixels.shape[1]

    def flat_pixels(self) -> np.ndarray:
        """Row-major (d, C) view of the pixel buffer."""
        return self.pixels.reshape(-1, self.channels)


@dataclass(frozen=True)
class LabeledDataset:
    """A stack of same-shape images with integer class labels.

    images: (N, H, W, C) uint8; labels: (N,) integer class indices.
    """

    images: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[3] not in (1, 3):
            raise StructuralError(f"images must be (N, H, W, C), got {self.images.shape}")
        if self.images.dtype != np.uint8:
            raise StructuralError(f"images dtype must be uint8, got {self.images.dtype}")
        if self.labels.shape != (self.images.shape[0],):
            raise StructuralError(
                f"labels shape {self.labels.shape} does not match {self.images.shape[0]} images"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise StructuralError("label outside 0..num_classes-1")

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def channels(self) -> int:
        return self.images.shape[3]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.images.shape[1:4]

    @property
    def num_pixels(self) -> int:
        """Total pixel count N across all images."""
        n, h, w, _ = self.images.shape
        return n * h * w

    def image(self, i: int) -> Image:
        return Image(self.images[i])


@dataclass(frozen=True)
class Codebook:
    """Ordered codeword list; order is the nearest-code tie-breaking order.

    codes: (k, C) int16 lattice vectors, all distinct.
    source: metadata dict describing how the codebook was built
            (e.g. {"algo": "density", "k": 2, "r": 153.0}).
    metric: metric used for nearest-code lookup.
    """

    codes: np.ndarray
    source: dict = field(default_factory=dict)
    metric: Metric = Metric.LINF

    def __post_init__(self):
        c = np.asarray(self.codes, dtype=np.int16)
        if c.ndim != 2 or c.shape[1] not in (1, 3):
            raise StructuralError(f"codes must be (k, C) with C in {{1, 3}}, got {c.shape}")
        if c.shape[0] < 1:
            raise StructuralError("codebook must contain at least one code")
        if c.min() < 0 or c.max() > LATTICE_MAX:
            raise StructuralError("code outside the pixel lattice")
        if len(np.unique(c, axis=0)) != c.shape[0]:
            raise StructuralError("codebook codes must be distinct")
        object.__setattr__(self, "codes", c)
        object.__setattr__(self, "metric", Metric(self.metric))

    @property
    def k(self) -> int:
        return self.codes.shape[0]

    @property
    def channels(self) -> int:
        return self.codes.shape[1]

    def to_json_dict(self) -> dict:
        return {
            "channels": int(self.channels),
            "metric": self.metric.value,
            "source": self.source,
            "codes": self.codes.astype(int).tolist(),
        }

    def digest(self) -> str:
        """Stable hex digest of the codebook contents."""
        payload = json.dumps(self.to_json_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


def save_codebook(cb: Codebook, path) -> None:
    atomic_write_json(path, cb.to_json_dict())


def load_codebook(path) -> Codebook:
    with open(path) as f:
        obj = json.load(f)
    for key in ("channels", "metric", "codes"):
        if key not in obj:
            raise ParseError(f"codebook file missing field {key!r}")
    codes = np.asarray(obj["codes"], dtype=np.int16)
    if codes.ndim != 2 or codes.shape[1] != obj["channels"]:
        raise ParseError("codebook codes do not match the declared channel count")
    return Codebook(codes=codes, source=obj.get("source", {}), metric=Metric(obj["metric"]))


def nearest_code(p, cb: Codebook) -> tuple[int, float]:
    """Index and distance of the nearest code; ties break to the lowest index."""
    pa = as_pixel(p)
    d = distances_to_codes(pa[None, :], cb.codes, cb.metric)[0]
    idx = int(np.argmin(d))  # argmin returns the first minimum
    return idx, float(d[idx])


def nearest_code_indices(pixels: np.ndarray, cb: Codebook) -> np.ndarray:
    """Vectorized nearest-code lookup for (n, C) pixel rows."""
    d = distances_to_codes(pixels, cb.codes, cb.metric)
    return np.argmin(d, axis=1)


def atomic_write_bytes(path, data: bytes) -> None:
    """Write a file atomically (temp file in the same directory + rename)."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path, obj: Any) -> None:
    atomic_write_bytes(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())
