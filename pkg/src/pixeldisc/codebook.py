"""Codebook construction: uniform binning levels, greedy density-estimation
selection with radius-r removal, and frequency-weighted k-medoids (PAM)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    LATTICE_MAX,
    LATTICE_SIZE,
    Codebook,
    ConfigError,
    Metric,
    distances_to_codes,
)
from .ingest import PixelHistogram, unflatten_values


@dataclass(frozen=True)
class DensityConfig:
    """Greedy density selection: k codewords, removal radius r (0-255 units)."""

    k: int
    r: float
    kernel: str = "identity"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"density k must be >= 1, got {self.k}")
        if self.r < 0:
            raise ConfigError(f"removal radius must be >= 0, got {self.r}")
        if self.kernel != "identity":
            raise ConfigError(f"unsupported kernel {self.kernel!r} (only 'identity')")


@dataclass(frozen=True)
class KMedoidsConfig:
    k: int
    max_iterations: int = 10
    metric: Metric = Metric.L1
    seed: int = 0
    candidate_cap: int = 4096

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k-medoids k must be >= 1, got {self.k}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.candidate_cap < 1:
            raise ConfigError("candidate_cap must be >= 1")


def binning_levels(k: int) -> np.ndarray:
    """The k per-channel lattice levels used by k-bin color-depth reduction.

    Level t (t = 0..k-1) is 255*t/(k-1) rounded half up, computed in exact
    integer arithmetic.
    """
    if k < 2:
        raise ConfigError(f"binning needs k >= 2, got {k}")
    if k > LATTICE_SIZE:
        raise ConfigError(f"binning k cannot exceed {LATTICE_SIZE}, got {k}")
    t = np.arange(k, dtype=np.int64)
    return ((2 * LATTICE_MAX * t + (k - 1)) // (2 * (k - 1))).astype(np.int16)


def binning_codes(k: int, channels: int = 1) -> Codebook:
    """Codebook of per-channel binning levels.

    The codebook is stored per channel (codes have a single channel); for RGB
    images discretization applies the same levels to each channel
    independently rather than materializing k**3 vector codes.
    """
    levels = binning_levels(k)
    return Codebook(
        codes=levels[:, None],
        source={"algo": "binning", "k": int(k), "channels": int(channels)},
        metric=Metric.LINF,
    )


def density_codes(h: PixelHistogram, cfg: DensityConfig) -> Codebook:
    """Greedy mode selection over the pixel histogram.

    Repeats k times: take the lattice value with the highest count (ties to
    the smallest flattened lattice index), then zero every lattice cell within
    l-infinity distance r of the pick. If the histogram empties early the
    shorter codebook is returned with source["short"] set.
    """
    counts = h.counts.copy()
    if counts.sum() == 0:
        raise ConfigError("cannot build density codes from an empty histogram")
    radius = int(math.floor(cfg.r))
    picks = []
    if h.channels == 3:
        grid = counts.reshape(LATTICE_SIZE, LATTICE_SIZE, LATTICE_SIZE)
    for _ in range(cfg.k):
        flat_idx = int(np.argmax(counts))
        if counts[flat_idx] <= 0:
            break
        picks.append(flat_idx)
        if h.channels == 1:
            lo, hi = max(0, flat_idx - radius), min(LATTICE_MAX, flat_idx + radius)
            counts[lo:hi + 1] = 0
        else:
            r0, g0, b0 = flat_idx // 65536, (flat_idx // 256) % 256, flat_idx % 256
            grid[max(0, r0 - radius):r0 + radius + 1,
                 max(0, g0 - radius):g0 + radius + 1,
                 max(0, b0 - radius):b0 + radius + 1] = 0
    short = len(picks) < cfg.k
    if short:
        warnings.warn(
            f"density selection exhausted the histogram after {len(picks)} of "
            f"{cfg.k} codes (r={cfg.r})"
        )
    codes = unflatten_values(np.asarray(picks, dtype=np.int64), h.channels)
    source = {"algo": "density", "k": int(cfg.k), "r": float(cfg.r),
              "kernel": cfg.kernel, "short": bool(short)}
    return Codebook(codes=codes, source=source, metric=Metric.LINF)


def kmedoids_cost(values: np.ndarray, weights: np.ndarray, medoids: np.ndarray,
                  metric: Metric) -> float:
    """Frequency-weighted k-medoids cost: sum_v w[v] * min_c d(v, c)."""
    d = distances_to_codes(values, medoids, metric)
    return float((weights * d.min(axis=1)).sum())


def _nearest_two(values, weights, medoid_values, metric):
    """Per-value nearest medoid index, its distance, and second-best distance."""
    d = distances_to_codes(values, medoid_values, metric)
    n1 = np.argmin(d, axis=1)
    d1 = d[np.arange(len(values)), n1]
    if d.shape[1] == 1:
        d2 = np.full(len(values), np.inf)
    else:
        d[np.arange(len(values)), n1] = np.inf
        d2 = d.min(axis=1)
    return n1, d1, d2


def kmedoids_codes(h: PixelHistogram, cfg: KMedoidsConfig) -> Codebook:
    """PAM over distinct pixel values weighted by their frequencies.

    Swap candidates are the cfg.candidate_cap most frequent distinct values;
    the cost is always evaluated over every distinct value, so capping only
    restricts which swaps are tried, never the objective. A swap is performed
    only when it strictly lowers the cost; sweeps stop after
    cfg.max_iterations or on the first sweep with no improving swap.
    """
    values, weights = h.nonzero_values()
    n_distinct = len(values)
    if n_distinct < cfg.k:
        raise ConfigError(
            f"k-medoids needs at least k distinct pixel values: k={cfg.k}, "
            f"distinct={n_distinct}"
        )
    rng = np.random.default_rng(cfg.seed)
    w = weights.astype(np.float64)
    medoid_idx = np.sort(rng.choice(n_distinct, size=cfg.k, replace=False, p=w / w.sum()))

    # candidates: most frequent first, ties to the smaller lattice index
    order = np.lexsort((np.arange(n_distinct), -weights))
    candidates = order[: cfg.candidate_cap]

    in_medoids = np.zeros(n_distinct, dtype=bool)
    in_medoids[medoid_idx] = True
    n1, d1, d2 = _nearest_two(values, w, values[medoid_idx], cfg.metric)
    cost = float((w * d1).sum())
    cost_trace = [cost]
    sweeps = 0
    for _ in range(cfg.max_iterations):
        sweeps += 1
        improved = False
        for p in candidates:
            if in_medoids[p]:
                continue
            dp = distances_to_codes(values, values[p][None, :], cfg.metric)[:, 0]
            # delta of swapping medoid j out and value p in:
            #   base term covers values whose nearest medoid survives,
            #   the bincount term corrects values that lose their nearest.
            gain = np.minimum(dp, d1) - d1
            base = float((w * gain).sum())
            reassign = np.minimum(dp, d2) - np.minimum(dp, d1)
            corr = np.bincount(n1, weights=w * reassign, minlength=cfg.k)
            deltas = base + corr
            j = int(np.argmin(deltas))
            if deltas[j] < -1e-9:
                in_medoids[medoid_idx[j]] = False
                in_medoids[p] = True
                medoid_idx[j] = p
                n1, d1, d2 = _nearest_two(values, w, values[medoid_idx], cfg.metric)
                cost = float((w * d1).sum())
                cost_trace.append(cost)
                improved = True
        if not improved:
            break

    final_idx = np.sort(medoid_idx)
    source = {
        "algo": "kmedoids",
        "k": int(cfg.k),
        "metric": cfg.metric.value,
        "seed": int(cfg.seed),
        "candidate_cap": int(cfg.candidate_cap),
        "sweeps": int(sweeps),
        "final_cost": cost,
        "cost_trace": [float(c) for c in cost_trace],
    }
    return Codebook(codes=values[final_idx], source=source, metric=Metric.LINF)
