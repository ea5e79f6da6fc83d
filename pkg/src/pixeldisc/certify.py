"""Sound robustness certification for classifier-after-discretization under a
per-pixel l-infinity budget: per-pixel candidate code sets, exhaustive
enumeration of the reachable discretized images, per-image verdicts, and the
Hoeffding-corrected global lower bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import Codebook, ConfigError, LabeledDataset, Metric, distances_to_codes

# codes strictly further than d(p, nearest) + 2*eps can never win after a
# perturbation; keeping "<=" (and therefore every tie) makes the set sound
# under any nearest-code tie-breaking rule
_SLACK = 1e-9


class Status(str, Enum):
    SUCCESS = "success"
    FAIL = "fail"
    UNABLE = "unable"


@dataclass(frozen=True)
class CertifyConfig:
    """eps is the attacker's per-pixel l-infinity budget in 0-255 units;
    images whose outcome space exceeds 2**budget_bits become Unable."""

    eps: float
    budget_bits: int = 20
    delta: float = 0.01
    chunk: int = 8192
    keep_verdicts: bool = False

    def __post_init__(self):
        if self.eps < 0:
            raise ConfigError(f"eps must be >= 0, got {self.eps}")
        if self.budget_bits < 0:
            raise ConfigError(f"budget_bits must be >= 0, got {self.budget_bits}")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must be in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class Verdict:
    status: Status
    log2_size: float
    witness: np.ndarray | None = None
    reason: str | None = None
    n_evaluated: int = 0


@dataclass(frozen=True)
class CertificateReport:
    m: int
    eps: float
    budget_bits: int
    delta: float
    n_success: int
    n_fail: int
    n_unable: int
    s_hat: float
    s_hat_star: float
    verdicts: list = field(default_factory=list)

    @property
    def success_given_able(self) -> float:
        able = self.n_success + self.n_fail
        return self.n_success / able if able else 0.0

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "eps": self.eps,
            "b": self.budget_bits,
            "delta": self.delta,
            "unable": self.n_unable / self.m if self.m else 0.0,
            "success": self.s_hat,
            "fail": self.n_fail / self.m if self.m else 0.0,
            "s_hat": self.s_hat,
            "s_hat_star": self.s_hat_star,
            "success_given_able": self.success_given_able,
        }


def metric_budget(metric: Metric, channels: int, eps: float) -> float:
    """Largest possible per-pixel perturbation size in the codebook's metric,
    given an l-infinity budget of eps per channel."""
    if metric == Metric.LINF:
        return eps
    if metric == Metric.L1:
        return channels * eps
    return math.sqrt(channels) * eps


def candidate_codes(p, cb: Codebook, eps: float) -> tuple[int, ...]:
    """Indices of every code the pixel could be discretized to under any
    perturbation of l-infinity size at most eps (sound superset)."""
    sets, _ = candidate_sets(np.atleast_1d(np.asarray(p, dtype=np.int64))[None, :], cb, eps)
    return tuple(int(i) for i in sets[0])


def candidate_sets(pixels: np.ndarray, cb: Codebook, eps: float):
    """Per-row candidate index arrays and their sizes for (n, C) pixels."""
    if eps < 0:
        raise ConfigError("eps must be >= 0")
    d = distances_to_codes(pixels, cb.codes, cb.metric)
    threshold = d.min(axis=1, keepdims=True) + 2.0 * metric_budget(cb.metric, cb.channels, eps)
    mask = d <= threshold + _SLACK
    sets = [np.flatnonzero(row) for row in mask]
    sizes = np.array([len(s) for s in sets], dtype=np.int64)
    return sets, sizes


def outcome_space_size(img, cb: Codebook, eps: float) -> tuple[float, np.ndarray]:
    """log2 of the number of reachable discretized images, never
    materializing the product, plus the per-pixel candidate-set sizes."""
    pixels = np.asarray(img.pixels if hasattr(img, "pixels") else img).reshape(-1, cb.channels)
    _, sizes = candidate_sets(pixels, cb, eps)
    return float(np.log2(sizes.astype(np.float64)).sum()), sizes


def _emit_outcomes(cand_values, sizes, start, stop, shape):
    """Outcomes start..stop (exclusive) of the mixed-radix enumeration:
    pixel 0 is the most significant digit, candidates cycle in codebook-index
    order within each pixel."""
    n = stop - start
    d = len(sizes)
    out = np.empty((n, d, shape[2]), dtype=np.uint8)
    rem = np.arange(start, stop, dtype=np.int64)
    for i in range(d - 1, -1, -1):
        digit = rem % sizes[i]
        rem //= sizes[i]
        out[:, i, :] = cand_values[i][digit]
    return out.reshape((n,) + shape)


def local_certificate(img, label: int, cb: Codebook, clf, cfg: CertifyConfig) -> Verdict:
    """Verdict for one (image, label) pair.

    Unable when the outcome space exceeds 2**budget_bits; otherwise every
    reachable discretized image is evaluated (short-circuiting on the first
    counterexample, which is returned as the witness).
    """
    pixels_hwc = np.asarray(img.pixels if hasattr(img, "pixels") else img)
    shape = pixels_hwc.shape
    pixels = pixels_hwc.reshape(-1, cb.channels)
    sets, sizes = candidate_sets(pixels, cb, eps=cfg.eps)
    log2_size = float(np.log2(sizes.astype(np.float64)).sum())
    if log2_size > cfg.budget_bits:
        return Verdict(status=Status.UNABLE, log2_size=log2_size,
                       reason=f"outcome space 2^{log2_size:.2f} exceeds 2^{cfg.budget_bits}")
    cand_values = [cb.codes[s].astype(np.uint8) for s in sets]
    total = math.prod(int(s) for s in sizes)  # exact: np.prod would wrap past 2**63
    done = 0
    while done < total:
        stop = min(done + cfg.chunk, total)
        batch = _emit_outcomes(cand_values, sizes, done, stop, shape)
        try:
            preds = np.asarray(clf.predict_batch(batch))
        except Exception as e:  # classifier failure: conservative Unable
            return Verdict(status=Status.UNABLE, log2_size=log2_size,
                           reason=f"classifier evaluation failed: {e!r}",
                           n_evaluated=done)
        bad = np.flatnonzero(preds != label)
        if len(bad):
            first = int(bad[0])
            return Verdict(status=Status.FAIL, log2_size=log2_size,
                           witness=batch[first], n_evaluated=done + first + 1)
        done = stop
    return Verdict(status=Status.SUCCESS, log2_size=log2_size, n_evaluated=total)


def hoeffding_lower_bound(s_hat: float, m: int, delta: float) -> float:
    """(1 - sqrt(log(1/delta) / (2m))) * s_hat, clamped at zero."""
    if m < 1:
        raise ConfigError("need at least one evaluated sample")
    if not 0 < delta <= 1:
        raise ConfigError(f"delta must be in (0, 1], got {delta}")
    shrink = 1.0 - math.sqrt(math.log(1.0 / delta) / (2.0 * m))
    return max(0.0, shrink * s_hat)


def global_certificate(ds: LabeledDataset, cb: Codebook, clf,
                       cfg: CertifyConfig) -> CertificateReport:
    """Aggregate verdicts over a dataset; Unable counts as non-success, so
    s_hat is a sound lower bound on the certified fraction."""
    if len(ds) < 1:
        raise ConfigError("global certificate needs at least one image")
    counts = {Status.SUCCESS: 0, Status.FAIL: 0, Status.UNABLE: 0}
    verdicts = []
    for i in range(len(ds)):
        v = local_certificate(ds.images[i], int(ds.labels[i]), cb, clf, cfg)
        counts[v.status] += 1
        if cfg.keep_verdicts:
            verdicts.append(v)
    m = len(ds)
    s_hat = counts[Status.SUCCESS] / m
    return CertificateReport(
        m=m, eps=cfg.eps, budget_bits=cfg.budget_bits, delta=cfg.delta,
        n_success=counts[Status.SUCCESS], n_fail=counts[Status.FAIL],
        n_unable=counts[Status.UNABLE], s_hat=s_hat,
        s_hat_star=hoeffding_lower_bound(s_hat, m, cfg.delta),
        verdicts=verdicts,
    )
