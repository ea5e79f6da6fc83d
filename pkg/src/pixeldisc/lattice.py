"""Compiled kernels for whole-lattice scans used by the hardness diagnostics.

The RGB lattice has 256**3 = 16.7M points; mapping each of them to its
nearest codeword and counting distinct codes inside l-infinity boxes are the
two operations that dominate full-corpus runs, so both live here as numba
kernels. Callers pass plain numpy arrays; everything is single-pass and
allocation-free inside the loops.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .core import Codebook, Metric, StructuralError


@njit(cache=True)
def _nearest_map_rgb(codes):  # codes: (k, 3) int16
    k = codes.shape[0]
    out = np.empty(256 * 256 * 256, dtype=np.uint16)
    for r in range(256):
        base_r = r * 65536
        for g in range(256):
            base = base_r + g * 256
            for b in range(256):
                best = 1 << 30
                best_i = 0
                for i in range(k):
                    dr = r - codes[i, 0]
                    if dr < 0:
                        dr = -dr
                    if dr >= best:
                        continue
                    dg = g - codes[i, 1]
                    if dg < 0:
                        dg = -dg
                    if dg >= best:
                        continue
                    db = b - codes[i, 2]
                    if db < 0:
                        db = -db
                    d = dr
                    if dg > d:
                        d = dg
                    if db > d:
                        d = db
                    if d < best:
                        best = d
                        best_i = i
                out[base + b] = best_i
    return out


@njit(cache=True)
def _box_distinct_rgb(tmap, values, radius, k):
    # tmap: flat (256**3,) uint16 nearest-code map; values: (n, 3) int16
    n = values.shape[0]
    out = np.empty(n, dtype=np.int32)
    words = (k + 63) // 64
    seen = np.zeros(words, dtype=np.uint64)
    for q in range(n):
        for w in range(words):
            seen[w] = 0
        cnt = 0
        r0 = max(0, values[q, 0] - radius)
        r1 = min(255, values[q, 0] + radius)
        g0 = max(0, values[q, 1] - radius)
        g1 = min(255, values[q, 1] + radius)
        b0 = max(0, values[q, 2] - radius)
        b1 = min(255, values[q, 2] + radius)
        for r in range(r0, r1 + 1):
            base_r = r * 65536
            for g in range(g0, g1 + 1):
                base = base_r + g * 256
                for b in range(b0, b1 + 1):
                    idx = tmap[base + b]
                    w = idx >> 6
                    bit = np.uint64(1) << np.uint64(idx & 63)
                    if (seen[w] & bit) == 0:
                        seen[w] |= bit
                        cnt += 1
        out[q] = cnt
    return out


def nearest_map_rgb(cb: Codebook) -> np.ndarray:
    """Flat (256**3,) uint16 map: lattice point -> nearest codeword index.

    Only defined for l-infinity codebooks (the lattice pruning in the kernel
    relies on per-axis distances bounding the metric).
    """
    if cb.channels != 3:
        raise StructuralError("nearest_map_rgb needs a 3-channel codebook")
    if cb.metric != Metric.LINF:
        raise StructuralError("nearest_map_rgb supports the linf metric only")
    return _nearest_map_rgb(np.ascontiguousarray(cb.codes, dtype=np.int16))


def box_distinct_counts(tmap: np.ndarray, values: np.ndarray, radius: int,
                        k: int) -> np.ndarray:
    """Distinct nearest-code indices within the clipped box of the given
    l-infinity radius around each (n, 3) lattice value."""
    v = np.ascontiguousarray(values, dtype=np.int16)
    return _box_distinct_rgb(tmap, v, int(radius), int(k))
