"""Synthetic image model with well-separated ground-truth codewords plus
bounded discrete noise, used to validate codeword recovery by the greedy
density algorithm and the closed-form recovery radius."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .codebook import DensityConfig, density_codes
from .core import ConfigError, LabeledDataset, LATTICE_MAX
from .ingest import build_histogram


@dataclass(frozen=True)
class IdealModelParams:
    """Ground-truth codewords with pairwise separation >= min_separation;
    noise magnitude t <= floor(min_separation / 8) occurs with probability
    proportional to exp(-t^2 / sigma^2)."""

    codewords: np.ndarray          # (k, C) int lattice vectors
    min_separation: float          # Gamma
    sigma: float
    d: int                         # pixels per image
    num_images: int
    seed: int = 0
    alphabet: int = 256            # K: per-channel alphabet size

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=np.int16)
        if cw.ndim != 2 or cw.shape[1] not in (1, 3):
            raise ConfigError(f"codewords must be (k, C) with C in {{1, 3}}, got {cw.shape}")
        object.__setattr__(self, "codewords", cw)
        if self.sigma <= 0:
            raise ConfigError("sigma must be > 0")
        if self.d < 1 or self.num_images < 1:
            raise ConfigError("d and num_images must be >= 1")
        k = cw.shape[0]
        if k > 1:
            diffs = np.abs(cw[:, None, :].astype(np.int32) - cw[None, :, :].astype(np.int32))
            sep = diffs.max(axis=2) + np.where(np.eye(k, dtype=bool), 1 << 20, 0)
            if sep.min() < self.min_separation:
                raise ConfigError(
                    f"codeword pair at distance {sep.min()} violates the "
                    f"required separation {self.min_separation}"
                )
        bound = self.noise_bound
        if cw.min() - bound < 0 or cw.max() + bound > LATTICE_MAX:
            raise ConfigError(
                "codeword too near the lattice boundary for the noise support "
                f"(need margin {bound})"
            )

    @property
    def k(self) -> int:
        return self.codewords.shape[0]

    @property
    def channels(self) -> int:
        return self.codewords.shape[1]

    @property
    def noise_bound(self) -> int:
        """Hard support bound floor(Gamma / 8) on the noise norm."""
        return int(math.floor(self.min_separation / 8.0))

    @property
    def num_pixels(self) -> int:
        return self.d * self.num_images


def noise_normalization(sigma: float, min_separation: float) -> float:
    """Normalizing constant of the truncated discrete noise-magnitude law."""
    bound = int(math.floor(min_separation / 8.0))
    t = np.arange(bound + 1, dtype=np.float64)
    return float(1.0 / np.exp(-(t * t) / (sigma * sigma)).sum())


def gamma_deviation(n_pixels: int, alphabet: int, delta: float) -> float:
    """Hoeffding deviation sqrt((4/N) * log(K/delta)) of the empirical
    pixel-value frequencies."""
    if n_pixels < 1:
        raise ConfigError("need at least one pixel")
    if not 0 < delta < 1:
        raise ConfigError(f"delta must be in (0, 1), got {delta}")
    return math.sqrt(4.0 / n_pixels * math.log(alphabet / delta))


def nu(sigma: float, k: int, gamma_dev: float, alpha_norm: float) -> float:
    """Recovery radius sigma * sqrt(log(1 / (1/k - 2*gamma/alpha)))."""
    arg = 1.0 / k - 2.0 * gamma_dev / alpha_norm
    if arg <= 0:
        raise ConfigError(
            "sample size N too small for this k, delta: "
            f"1/k - 2*gamma/alpha = {arg:.3g} <= 0"
        )
    return sigma * math.sqrt(math.log(1.0 / arg))


def _sample_shell(rng: np.random.Generator, magnitudes: np.ndarray,
                  channels: int) -> np.ndarray:
    """Integer noise vectors uniform on the exact l-infinity shell of each
    magnitude (rejection from the enclosing box)."""
    n = len(magnitudes)
    out = np.zeros((n, channels), dtype=np.int64)
    pending = np.flatnonzero(magnitudes > 0)
    while len(pending):
        t = magnitudes[pending]
        draw = rng.integers(-t[:, None], t[:, None] + 1, size=(len(pending), channels))
        ok = np.abs(draw).max(axis=1) == t
        out[pending[ok]] = draw[ok]
        pending = pending[~ok]
    return out


def sample_dataset(params: IdealModelParams, rng=None) -> LabeledDataset:
    """Draw images pixel by pixel: a codeword chosen uniformly (so every
    codeword has marginal probability 1/k), plus shell noise. Labels are 0."""
    if rng is None:
        rng = np.random.default_rng(params.seed)
    n = params.num_pixels
    skeleton = rng.integers(0, params.k, size=n)
    bound = params.noise_bound
    t_values = np.arange(bound + 1, dtype=np.float64)
    probs = np.exp(-(t_values * t_values) / (params.sigma ** 2))
    probs /= probs.sum()
    magnitudes = rng.choice(bound + 1, size=n, p=probs)
    noise = _sample_shell(rng, magnitudes, params.channels)
    pixels = params.codewords[skeleton].astype(np.int64) + noise
    images = pixels.reshape(params.num_images, 1, params.d, params.channels)
    return LabeledDataset(images=images.astype(np.uint8),
                          labels=np.zeros(params.num_images, dtype=np.int64),
                          num_classes=1)


@dataclass(frozen=True)
class TrialResult:
    recovered: bool
    n_codes: int
    max_match_distance: float
    reason: str = ""


@dataclass(frozen=True)
class RecoveryReport:
    nu: float
    r: float
    gamma_dev: float
    alpha_norm: float
    premise_ok: bool         # Gamma > 16 * nu
    trials: list[TrialResult] = field(default_factory=list)

    @property
    def recovery_rate(self) -> float:
        if not self.trials:
            return 0.0
        return sum(t.recovered for t in self.trials) / len(self.trials)

    def to_json_dict(self) -> dict:
        return {
            "nu": self.nu,
            "r": self.r,
            "gamma_dev": self.gamma_dev,
            "alpha_norm": self.alpha_norm,
            "premise_ok": self.premise_ok,
            "recovery_rate": self.recovery_rate,
            "trials": [
                {"recovered": t.recovered, "n_codes": t.n_codes,
                 "max_match_distance": t.max_match_distance, "reason": t.reason}
                for t in self.trials
            ],
        }


def match_codes(codes: np.ndarray, truth: np.ndarray, tol: float) -> TrialResult:
    """Check for a bijection pairing each ground-truth codeword with exactly
    one recovered code at l-infinity distance <= tol."""
    k = truth.shape[0]
    if codes.shape[0] != k:
        return TrialResult(recovered=False, n_codes=codes.shape[0],
                           max_match_distance=float("inf"),
                           reason=f"expected {k} codes, got {codes.shape[0]}")
    diffs = np.abs(codes[:, None, :].astype(np.int32) - truth[None, :, :].astype(np.int32))
    dist = diffs.max(axis=2)
    nearest = dist.argmin(axis=1)
    nearest_dist = dist[np.arange(k), nearest]
    if len(set(nearest.tolist())) != k:
        return TrialResult(recovered=False, n_codes=k,
                           max_match_distance=float(nearest_dist.max()),
                           reason="two recovered codes claim the same codeword")
    if nearest_dist.max() > tol:
        return TrialResult(recovered=False, n_codes=k,
                           max_match_distance=float(nearest_dist.max()),
                           reason=f"match distance {nearest_dist.max()} > {tol:.3f}")
    return TrialResult(recovered=True, n_codes=k,
                       max_match_distance=float(nearest_dist.max()))


def validate_recovery(params: IdealModelParams, trials: int,
                      delta: float = 0.01) -> RecoveryReport:
    """Monte-Carlo check that greedy density selection with r = 2*nu recovers
    the ground-truth codewords to within nu."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    alpha = noise_normalization(params.sigma, params.min_separation)
    gamma = gamma_deviation(params.num_pixels, params.alphabet, delta)
    radius = nu(params.sigma, params.k, gamma, alpha)
    premise_ok = params.min_separation > 16.0 * radius
    if not premise_ok:
        warnings.warn(
            f"separation {params.min_separation} is not > 16*nu = {16 * radius:.2f}; "
            "the recovery guarantee is void (run proceeds)"
        )
    seeds = np.random.SeedSequence(params.seed).spawn(trials)
    results = []
    for seq in seeds:
        ds = sample_dataset(params, rng=np.random.default_rng(seq))
        hist = build_histogram(ds)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # a short codebook is simply a failed trial
            cb = density_codes(hist, DensityConfig(k=params.k, r=2.0 * radius))
        results.append(match_codes(cb.codes, params.codewords, radius))
    return RecoveryReport(nu=radius, r=2.0 * radius, gamma_dev=gamma,
                          alpha_norm=alpha, premise_ok=premise_ok, trials=results)


def random_codewords(k: int, channels: int, min_separation: float,
                     seed: int = 0, max_tries: int = 100000) -> np.ndarray:
    """Rejection-sample k lattice codewords with pairwise l-infinity
    separation >= min_separation, keeping the noise-support margin free."""
    margin = int(math.floor(min_separation / 8.0))
    lo, hi = margin, LATTICE_MAX - margin
    if hi < lo:
        raise ConfigError(f"separation {min_separation} leaves no room on the lattice")
    rng = np.random.default_rng(seed)
    chosen: list[np.ndarray] = []
    for _ in range(max_tries):
        cand = rng.integers(lo, hi + 1, size=channels)
        if all(np.abs(cand - c).max() >= min_separation for c in chosen):
            chosen.append(cand)
            if len(chosen) == k:
                return np.asarray(chosen, dtype=np.int16)
    raise ConfigError(
        f"could not place {k} codewords with separation {min_separation} "
        f"in {max_tries} attempts"
    )
