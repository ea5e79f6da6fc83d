"""Dataset-difficulty diagnostics: reachable-code sets per pixel, the
per-image fragmentation measure and its CDF, exact l-infinity neighborhood
counts via summed-area tables, and pixel-value histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, LabeledDataset, Image, LATTICE_MAX, LATTICE_SIZE
from .discretize import Discretizer
from .ingest import PixelHistogram


@dataclass(frozen=True)
class HardnessReport:
    """Per-image fragmentation measures plus the dataset CDF."""

    k: int
    eps: float
    measures: np.ndarray          # (N,) per-image (1/d) * log_k prod |C_i|
    log2_products: np.ndarray     # (N,) per-image sum of log2 |C_i|
    codebook_digest: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def median_measure(self) -> float:
        return float(np.median(self.measures))

    @property
    def median_log2_product(self) -> float:
        return float(np.median(self.log2_products))

    def cdf_points(self) -> list[tuple[float, float]]:
        """Sorted (measure, cumulative fraction) pairs, ending at 1.0."""
        n = len(self.measures)
        ordered = np.sort(self.measures)
        return [(float(m), (i + 1) / n) for i, m in enumerate(ordered)]


@dataclass(frozen=True)
class NeighborhoodMap:
    """N_inf(x, eps) for every distinct pixel value present in the data."""

    eps: float
    values: np.ndarray   # (n, C) int16
    counts: np.ndarray   # (n,) int64
    total_count: int

    @property
    def max_count(self) -> int:
        return int(self.counts.max()) if len(self.counts) else 0


def _window(v: int, radius: int, upper: int = LATTICE_MAX) -> tuple[int, int]:
    return max(0, v - radius), min(upper, v + radius)


def reachable_outputs(p, d: Discretizer, eps: float) -> frozenset:
    """Exact set of discretization outputs over every lattice point z with
    ||z - p||_inf <= eps; outputs are channel tuples."""
    if eps < 0:
        raise ConfigError("eps must be >= 0")
    radius = int(math.floor(eps))
    p = np.atleast_1d(np.asarray(p, dtype=np.int64))
    if d.mode == "binning":
        # channels are independent: the output set is the product of the
        # per-channel reachable level sets
        per_channel = []
        lv = d.levels()
        for v in p:
            lo, hi = _window(int(v), radius)
            t_lo = (2 * (d.k - 1) * lo + 255) // 510
            t_hi = (2 * (d.k - 1) * hi + 255) // 510
            per_channel.append([int(lv[t]) for t in range(t_lo, t_hi + 1)])
        outs = [()]
        for levels in per_channel:
            outs = [o + (l,) for o in outs for l in levels]
        return frozenset(outs)
    idx = reachable_codes(p, d, eps)
    codes = d.codebook.codes
    return frozenset(tuple(int(c) for c in codes[i]) for i in idx)


def reachable_codes(p, d: Discretizer, eps: float) -> frozenset:
    """Code indices reachable through T from the eps-ball around pixel p
    (codebook discretizers only)."""
    if d.mode != "codebook":
        raise ConfigError("reachable_codes needs a codebook discretizer")
    if eps < 0:
        raise ConfigError("eps must be >= 0")
    radius = int(math.floor(eps))
    p = np.atleast_1d(np.asarray(p, dtype=np.int64))
    ranges = [np.arange(lo, hi + 1) for lo, hi in
              (_window(int(v), radius) for v in p)]
    if len(ranges) == 1:
        zs = ranges[0][:, None]
    else:
        grids = np.meshgrid(*ranges, indexing="ij")
        zs = np.stack([g.ravel() for g in grids], axis=1)
    from .discretize import nearest_indices_chunked

    idx = nearest_indices_chunked(zs, d.codebook)
    return frozenset(int(i) for i in np.unique(idx))


def _class_count_table_1d(d: Discretizer, radius: int) -> np.ndarray:
    """(256,) table: value -> number of distinct outputs in its window."""
    if d.mode == "binning":
        lo = np.maximum(0, np.arange(256) - radius)
        hi = np.minimum(LATTICE_MAX, np.arange(256) + radius)
        t_lo = (2 * (d.k - 1) * lo + 255) // 510
        t_hi = (2 * (d.k - 1) * hi + 255) // 510
        return (t_hi - t_lo + 1).astype(np.int64)
    from .discretize import nearest_indices_chunked

    tmap = nearest_indices_chunked(np.arange(256, dtype=np.int64)[:, None], d.codebook)
    out = np.empty(256, dtype=np.int64)
    for v in range(256):
        lo, hi = _window(v, radius)
        out[v] = len(np.unique(tmap[lo:hi + 1]))
    return out


def _per_pixel_class_counts(images: np.ndarray, d: Discretizer, eps: float) -> np.ndarray:
    """|C_i| for every pixel of an (N, H, W, C) stack, shape (N, H*W)."""
    n, h, w, c = images.shape
    radius = int(math.floor(eps))
    if c == 1:
        table = _class_count_table_1d(d, radius)
        return table[images.reshape(n, -1).astype(np.int64)]
    if d.mode == "binning":
        table = _class_count_table_1d(d, radius)
        per_channel = table[images.astype(np.int64)]
        return per_channel.prod(axis=3).reshape(n, -1)
    from .ingest import flatten_values, unflatten_values
    from .lattice import box_distinct_counts, nearest_map_rgb

    keys = flatten_values(images.reshape(-1, 3))
    uniq, inverse = np.unique(keys, return_inverse=True)
    tmap = nearest_map_rgb(d.codebook)
    counts_uniq = box_distinct_counts(tmap, unflatten_values(uniq, 3), radius,
                                      d.codebook.k)
    return counts_uniq.astype(np.int64)[inverse].reshape(n, -1)


def fragmentation_measure(img: Image, d: Discretizer, eps: float, k: int) -> float:
    """(1/d) * log_k of the product of per-pixel reachable-output counts,
    accumulated in log space."""
    if k < 2:
        raise ConfigError(f"fragmentation needs k >= 2, got {k}")
    counts = _per_pixel_class_counts(img.pixels[None], d, eps)[0]
    return float(np.log(counts).sum() / (len(counts) * math.log(k)))


def fragmentation_report(ds: LabeledDataset, d: Discretizer, eps: float, k: int,
                         codebook_digest: str = "",
                         metadata: dict | None = None) -> HardnessReport:
    """Fragmentation measures for every image of a dataset."""
    if k < 2:
        raise ConfigError(f"fragmentation needs k >= 2, got {k}")
    counts = _per_pixel_class_counts(ds.images, d, eps)
    logs = np.log(counts.astype(np.float64))
    measures = logs.sum(axis=1) / (counts.shape[1] * math.log(k))
    log2_products = logs.sum(axis=1) / math.log(2)
    return HardnessReport(k=k, eps=eps, measures=measures,
                          log2_products=log2_products,
                          codebook_digest=codebook_digest,
                          metadata=metadata or {})


def _padded_sat_3d(h: PixelHistogram) -> np.ndarray:
    sat = np.zeros((LATTICE_SIZE + 1,) * 3, dtype=np.int64)
    sat[1:, 1:, 1:] = h.counts.reshape((LATTICE_SIZE,) * 3)
    for axis in range(3):
        np.cumsum(sat, axis=axis, out=sat)
    return sat


def _box_counts_3d(sat: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Inclusive box sums [lo, hi] via 8-corner inclusion-exclusion on the
    zero-padded summed-area table."""
    l0, l1, l2 = lo[:, 0], lo[:, 1], lo[:, 2]
    h0, h1, h2 = hi[:, 0] + 1, hi[:, 1] + 1, hi[:, 2] + 1
    return (sat[h0, h1, h2]
            - sat[l0, h1, h2] - sat[h0, l1, h2] - sat[h0, h1, l2]
            + sat[l0, l1, h2] + sat[l0, h1, l2] + sat[h0, l1, l2]
            - sat[l0, l1, l2])


def neighborhood_map(h: PixelHistogram, eps: float) -> NeighborhoodMap:
    """Exact N_inf(x, eps) for every distinct pixel value present in the
    histogram, via prefix sums (C=1) or a 3D summed-area table (C=3)."""
    if eps < 0:
        raise ConfigError("eps must be >= 0")
    radius = int(math.floor(eps))
    values, _ = h.nonzero_values()
    if len(values) == 0:
        return NeighborhoodMap(eps=eps, values=values,
                               counts=np.zeros(0, dtype=np.int64), total_count=0)
    if h.channels == 1:
        csum = np.concatenate([[0], np.cumsum(h.counts)])
        lo = np.maximum(0, values[:, 0].astype(np.int64) - radius)
        hi = np.minimum(LATTICE_MAX, values[:, 0].astype(np.int64) + radius)
        counts = csum[hi + 1] - csum[lo]
    else:
        sat = _padded_sat_3d(h)
        v = values.astype(np.int64)
        lo = np.maximum(0, v - radius)
        hi = np.minimum(LATTICE_MAX, v + radius)
        counts = _box_counts_3d(sat, lo, hi)
    return NeighborhoodMap(eps=eps, values=values, counts=counts.astype(np.int64),
                           total_count=h.total_count)


def neighborhood_count_bruteforce(pixels: np.ndarray, query, eps: float) -> int:
    """Reference count of pixels within l-infinity eps of the query, by direct
    comparison; used as the oracle for the summed-area-table path."""
    radius = int(math.floor(eps))
    q = np.atleast_1d(np.asarray(query, dtype=np.int64))
    diff = np.abs(pixels.astype(np.int64) - q[None, :])
    return int((diff.max(axis=1) <= radius).sum())


def value_histogram_rows(h: PixelHistogram) -> list[tuple]:
    """(value..., count) rows for every pixel value present in the data."""
    values, counts = h.nonzero_values()
    return [tuple(int(c) for c in v) + (int(n),) for v, n in zip(values, counts)]
