"""Pixelwise discretization T (binning or nearest-codeword) and the smooth
softmin surrogate used for backward-pass gradient approximation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .codebook import binning_levels
from .core import (
    Codebook,
    ConfigError,
    Image,
    LabeledDataset,
    StructuralError,
    distances_to_codes,
)

SCALE = 255.0


@dataclass(frozen=True)
class SurrogateConfig:
    """Softmin temperature and scope for the differentiable stand-in for T.

    alpha is the temperature on the [0, 1] pixel scale; per_channel applies
    the scalar softmin independently per channel, per_pixel_vector weights
    whole codewords by the l-infinity distance in pixel space.
    """

    alpha: float
    scope: str = "per_channel"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError(f"surrogate alpha must be > 0, got {self.alpha}")
        if self.scope not in ("per_channel", "per_pixel_vector"):
            raise ConfigError(f"unknown surrogate scope {self.scope!r}")


@dataclass(frozen=True)
class Discretizer:
    """Pixelwise preprocessing map. mode is "binning" or "codebook".

    Binning rounds each channel with the exact half-up rule
    t = floor((k-1) * v/255 + 1/2), emitting lattice level values; codebook
    mode snaps each pixel vector to its nearest codeword (ties to the lowest
    codebook index).
    """

    mode: str
    k: int = 0
    codebook: Optional[Codebook] = None

    @classmethod
    def binning(cls, k: int) -> "Discretizer":
        binning_levels(k)  # validates k
        return cls(mode="binning", k=k)

    @classmethod
    def from_codebook(cls, cb: Codebook) -> "Discretizer":
        if cb.source.get("algo") == "binning":
            return cls.binning(cb.source["k"])
        return cls(mode="codebook", k=cb.k, codebook=cb)

    def per_pixel_outcomes(self, channels: int) -> int:
        """Number of distinct values a single pixel can discretize to."""
        if self.mode == "binning":
            return self.k ** channels
        return self.codebook.k

    def levels(self) -> np.ndarray:
        if self.mode != "binning":
            raise ConfigError("levels() is only defined for binning discretizers")
        return binning_levels(self.k)

    def surrogate_codes(self) -> np.ndarray:
        """Codes on the [0, 1] scale matching this discretizer.

        Binning uses the exact rational levels t/(k-1); codebook mode divides
        the lattice codewords by 255.
        """
        if self.mode == "binning":
            return np.arange(self.k, dtype=np.float64) / (self.k - 1)
        return self.codebook.codes.astype(np.float64) / SCALE

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        """Discretize (n, C) pixel rows; returns (n, C) uint8."""
        v = np.asarray(values)
        if self.mode == "binning":
            lv = binning_levels(self.k).astype(np.uint8)
            t = (2 * (self.k - 1) * v.astype(np.int64) + 255) // 510
            return lv[t]
        cb = self.codebook
        if v.shape[1] != cb.channels:
            raise StructuralError(
                f"image channels {v.shape[1]} do not match codebook channels {cb.channels}"
            )
        idx = nearest_indices_chunked(v, cb)
        return cb.codes[idx].astype(np.uint8)

    def apply_images(self, images: np.ndarray) -> np.ndarray:
        """Discretize an (N, H, W, C) uint8 stack."""
        shape = images.shape
        if self.mode == "binning":
            return self.apply_values(images.reshape(-1, shape[-1])).reshape(shape)
        from .ingest import flatten_values, unflatten_values

        # map through the distinct values actually present
        flat = images.reshape(-1, shape[-1])
        uniq, inverse = np.unique(flatten_values(flat), return_inverse=True)
        out_uniq = self.apply_values(unflatten_values(uniq, shape[-1]))
        return out_uniq[inverse].reshape(shape)


def nearest_indices_chunked(values: np.ndarray, cb: Codebook,
                            chunk: int = 1 << 14) -> np.ndarray:
    """Nearest-code indices for (n, C) rows, bounded temporary memory."""
    v = np.asarray(values)
    out = np.empty(len(v), dtype=np.int64)
    for start in range(0, len(v), chunk):
        stop = min(start + chunk, len(v))
        d = distances_to_codes(v[start:stop], cb.codes, cb.metric)
        out[start:stop] = np.argmin(d, axis=1)
    return out


def discretize_image(img: Image, d: Discretizer) -> Image:
    return Image(d.apply_images(img.pixels[None])[0])


def discretize_dataset(ds: LabeledDataset, d: Discretizer) -> LabeledDataset:
    return LabeledDataset(images=d.apply_images(ds.images), labels=ds.labels,
                          num_classes=ds.num_classes)


def surrogate_value(pixel, codes01: np.ndarray, cfg: SurrogateConfig) -> np.ndarray:
    """Softmin-weighted convex combination of codes on the [0, 1] scale.

    pixel: lattice channel vector (ints in 0..255); codes01: (k,) per-channel
    levels for per_channel scope, or (k, C) codewords for per_pixel_vector,
    both already on [0, 1]. Returns a (C,) float vector in [0, 1].
    """
    p = np.atleast_1d(np.asarray(pixel, dtype=np.float64)) / SCALE
    codes01 = np.asarray(codes01, dtype=np.float64)
    if cfg.scope == "per_channel":
        if codes01.ndim == 2 and codes01.shape[1] == 1:
            codes01 = codes01[:, 0]
        if codes01.ndim != 1:
            raise StructuralError("per_channel scope needs a flat level array")
        d = np.abs(p[:, None] - codes01[None, :])  # (C, k)
        w = np.exp(-cfg.alpha * (d - d.min(axis=1, keepdims=True)))
        return (w * codes01[None, :]).sum(axis=1) / w.sum(axis=1)
    if codes01.ndim != 2 or codes01.shape[1] != p.shape[0]:
        raise StructuralError(
            f"per_pixel_vector scope needs (k, C) codes matching the pixel, got {codes01.shape}"
        )
    d = np.abs(p[None, :] - codes01).max(axis=1)  # (k,)
    w = np.exp(-cfg.alpha * (d - d.min()))
    return (w[:, None] * codes01).sum(axis=0) / w.sum()
