"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them).

Criteria that replay the full MNIST / CIFAR-10 corpora need the real files
under $PIXELDISC_DATA_DIR (default ./data); they skip with an explicit
message when the data is not installed (scripts/fetch_data.py downloads it).
Everything else runs on synthetic or closed-form inputs.
"""

import math
import os
import resource
import time
from pathlib import Path

import numpy as np
import pytest

from pixeldisc.certify import CertifyConfig, Status, hoeffding_lower_bound, local_certificate
from pixeldisc.cli import load_dataset
from pixeldisc.codebook import DensityConfig, KMedoidsConfig, density_codes, kmedoids_codes
from pixeldisc.core import Codebook
from pixeldisc.discretize import Discretizer, SurrogateConfig, surrogate_value
from pixeldisc.hardness import (
    fragmentation_report,
    neighborhood_count_bruteforce,
    neighborhood_map,
)
from pixeldisc.ideal import IdealModelParams, random_codewords, validate_recovery
from pixeldisc.ingest import build_histogram

from .test_certify import brute_force_robust, random_instance
from .test_codebook import brute_force_kmedoids, hist_from_values

DATA_DIR = Path(os.environ.get("PIXELDISC_DATA_DIR", "data"))


def _require_mnist():
    for name in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                 "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"):
        if not (DATA_DIR / name).exists() and not (DATA_DIR / (name + ".gz")).exists():
            pytest.skip(
                f"real MNIST file {name} not present under {DATA_DIR}/ "
                "(set PIXELDISC_DATA_DIR or run scripts/fetch_data.py)")


def _require_cifar():
    base = DATA_DIR / "cifar-10-batches-bin"
    probe = base if base.exists() else DATA_DIR
    needed = [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]
    for name in needed:
        if not (probe / name).exists():
            pytest.skip(
                f"real CIFAR-10 batch {name} not present under {probe}/ "
                "(set PIXELDISC_DATA_DIR or run scripts/fetch_data.py)")


def _report(name: str):
    print(f"\nPASS {name}")


def test_criterion_1_cifar_neighborhood_maximum():
    """CIFAR-10 train, eps=8: max l-inf neighborhood count is exactly
    1,567,080; under 5 minutes and 2 GB."""
    _require_cifar()
    start = time.time()
    ds = load_dataset("cifar10", DATA_DIR, "train")
    assert len(ds) == 50000 and ds.num_pixels == 51_200_000
    hist = build_histogram(ds)
    assert hist.total_count == 51_200_000
    nbhd = neighborhood_map(hist, eps=8.0)
    elapsed = time.time() - start
    assert nbhd.max_count == 1_567_080
    assert elapsed < 300, f"took {elapsed:.0f}s"
    peak_gb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024**2
    assert peak_gb < 2.0, f"peak RSS {peak_gb:.2f} GB"
    _report(f"criterion 1: CIFAR-10 max neighborhood = {nbhd.max_count} "
            f"({elapsed:.0f}s, peak {peak_gb:.2f} GB)")


def test_criterion_2_mnist_fragmentation_median():
    """MNIST, density codes (k=2, r=153), eps=0.3 on the unit scale: median
    fragmentation measure 0.06 +/- 0.02 (median log2 product 47 +/- 15)."""
    _require_mnist()
    start = time.time()
    train = load_dataset("idx", DATA_DIR, "train")
    cb = density_codes(build_histogram(train), DensityConfig(k=2, r=0.6 * 255))
    test = load_dataset("idx", DATA_DIR, "test")
    disc = Discretizer.from_codebook(cb)
    rep = fragmentation_report(test, disc, eps=0.3 * 255, k=2,
                               codebook_digest=cb.digest())
    elapsed = time.time() - start
    assert rep.median_measure == pytest.approx(0.06, abs=0.02)
    assert rep.median_log2_product == pytest.approx(47, abs=15)
    assert elapsed < 120, f"took {elapsed:.0f}s"
    _report(f"criterion 2: MNIST median measure {rep.median_measure:.4f}, "
            f"median log2 product {rep.median_log2_product:.1f} ({elapsed:.0f}s)")


def test_criterion_3_cifar_fragmentation_median():
    """CIFAR-10, density codes (k=300, r=16), eps=8: median fragmentation
    measure 0.27 +/- 0.05."""
    _require_cifar()
    start = time.time()
    train = load_dataset("cifar10", DATA_DIR, "train")
    cb = density_codes(build_histogram(train), DensityConfig(k=300, r=16.0))
    assert cb.k == 300
    test = load_dataset("cifar10", DATA_DIR, "test")
    disc = Discretizer.from_codebook(cb)
    rep = fragmentation_report(test, disc, eps=8.0, k=300,
                               codebook_digest=cb.digest())
    elapsed = time.time() - start
    assert rep.median_measure == pytest.approx(0.27, abs=0.05)
    assert elapsed < 1800, f"took {elapsed:.0f}s"
    _report(f"criterion 3: CIFAR-10 median measure {rep.median_measure:.4f} "
            f"({elapsed:.0f}s)")


def test_criterion_4_hoeffding_arithmetic():
    """m=10000, delta=0.01, s_hat=0.9643 -> s_hat_star = 0.9497 +/- 0.0001."""
    got = hoeffding_lower_bound(0.9643, 10000, 0.01)
    assert got == pytest.approx(0.9497, abs=1e-4)
    closed = (1 - math.sqrt(math.log(1 / 0.01) / (2 * 10000))) * 0.9643
    assert got == pytest.approx(closed, abs=1e-12)
    _report(f"criterion 4: Hoeffding bound {got:.6f} = 0.9497 +/- 1e-4")


def test_criterion_5_certificate_soundness_oracle():
    """>= 1000 randomized tiny instances: every Success verdict survives
    exhaustive lattice brute force; zero violations, under a minute."""
    start = time.time()
    rng = np.random.default_rng(2024)
    instances = 1000
    n_success = 0
    for _ in range(instances):
        img, label, cb, clf, eps = random_instance(rng)
        v = local_certificate(img, label, cb, clf,
                              CertifyConfig(eps=eps, budget_bits=16))
        if v.status == Status.SUCCESS:
            robust, _ = brute_force_robust(img, label, cb, clf, eps)
            assert robust, (f"UNSOUND: img={img.reshape(-1).tolist()} "
                            f"codes={cb.codes.reshape(-1).tolist()} eps={eps}")
            n_success += 1
    elapsed = time.time() - start
    assert n_success >= 100
    assert elapsed < 60, f"took {elapsed:.1f}s"
    _report(f"criterion 5: {instances} instances, {n_success} Success verdicts, "
            f"0 soundness violations ({elapsed:.1f}s)")


def test_criterion_6_recovery_monte_carlo():
    """k=4, separation 64, sigma 2, >= 1e6 pixels per trial, r = 2*nu,
    100 trials: recovery rate >= 0.95; noiseless control 1.00; overlapping
    negative control < 1.00 with failures logged."""
    codewords = random_codewords(4, 3, 64.0, seed=7)
    params = IdealModelParams(codewords=codewords, min_separation=64.0,
                              sigma=2.0, d=1024, num_images=1000, seed=7)
    assert params.num_pixels >= 10**6
    report = validate_recovery(params, trials=100)
    assert report.premise_ok
    assert report.recovery_rate >= 0.95

    noiseless = IdealModelParams(codewords=codewords, min_separation=64.0,
                                 sigma=1e-9, d=256, num_images=50, seed=8)
    clean = validate_recovery(noiseless, trials=20)
    assert clean.recovery_rate == 1.0

    overlapping = IdealModelParams(
        codewords=np.array([[100], [101], [200]], dtype=np.int16),
        min_separation=1.0, sigma=1.0, d=256, num_images=50, seed=9)
    with pytest.warns(UserWarning):
        control = validate_recovery(overlapping, trials=10)
    assert control.recovery_rate < 1.0
    failures = [t.reason for t in control.trials if not t.recovered]
    assert failures
    _report(f"criterion 6: recovery {report.recovery_rate:.2f} (r={report.r:.3f}), "
            f"noiseless 1.00, negative control {control.recovery_rate:.2f} "
            f"with {len(failures)} logged failures")


def test_criterion_7a_surrogate_convergence():
    """At alpha=1e6 the softmin surrogate agrees with T to 1e-6 on every
    lattice pixel that is not exactly midway between two codes."""
    worst = 0.0
    # binning never places a lattice pixel on a decision midpoint
    for k in (2, 8, 256):
        d = Discretizer.binning(k)
        codes01 = d.surrogate_codes()
        cfg = SurrogateConfig(alpha=1e6)
        lv01 = d.levels().astype(np.float64) / 255.0
        for v in range(256):
            g = surrogate_value((v,), codes01, cfg)[0]
            t_lattice = d.apply_values(np.array([[v]]))[0, 0] / 255.0
            t_exact = codes01[int(np.argmin(np.abs(lv01 - t_lattice)))]
            worst = max(worst, abs(g - t_exact))
    # codebook mode: exclude exact midpoints explicitly
    cb = Codebook(codes=np.array([[0], [255]]))
    d = Discretizer.from_codebook(cb)
    codes01 = d.surrogate_codes()[:, 0]
    cfg = SurrogateConfig(alpha=1e6)
    for v in range(256):
        dists = np.abs(v / 255.0 - codes01)
        if abs(dists[0] - dists[1]) < 1e-12:
            continue
        g = surrogate_value((v,), codes01, cfg)[0]
        t = d.apply_values(np.array([[v]]))[0, 0] / 255.0
        worst = max(worst, abs(g - t))
    assert worst < 1e-6
    _report(f"criterion 7a: surrogate vs T max deviation {worst:.2e} < 1e-6")


def test_criterion_7b_kmedoids_invariants():
    """Accepted swaps strictly decrease the cost; the 4-point instance ends
    at the brute-force optimum (cost 2)."""
    h = hist_from_values([(0, 1), (1, 1), (9, 1), (10, 1)])
    from pixeldisc.core import Metric

    best_cost, _ = brute_force_kmedoids([0, 1, 9, 10], [1, 1, 1, 1], 2, Metric.L1)
    assert best_cost == 2
    for seed in range(5):
        cb = kmedoids_codes(h, KMedoidsConfig(k=2, max_iterations=20, seed=seed))
        trace = cb.source["cost_trace"]
        assert all(b < a for a, b in zip(trace, trace[1:]))
        assert cb.source["final_cost"] == best_cost
    _report("criterion 7b: k-medoids cost strictly decreasing, 4-point optimum 2")


def test_criterion_7c_density_separation():
    """Every pair of density-selected codes sits strictly further apart
    than the removal radius."""
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(50):
        pairs = [(int(v), int(n)) for v, n in
                 zip(rng.choice(256, size=12, replace=False),
                     rng.integers(1, 40, size=12))]
        r = float(rng.uniform(0, 60))
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cb = density_codes(hist_from_values(pairs), DensityConfig(k=5, r=r))
        vals = cb.codes[:, 0].astype(int)
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                assert abs(vals[i] - vals[j]) > r
                checked += 1
    assert checked
    _report(f"criterion 7c: density separation > r on {checked} pairs")


def test_criterion_7d_sat_equals_bruteforce():
    """Summed-area-table neighborhood counts equal brute force on >= 1000
    random queries."""
    rng = np.random.default_rng(6)
    checked = 0
    for round_ in range(4):
        pixels = rng.integers(0, 256, size=(300, 3)).astype(np.uint8)
        from pixeldisc.core import LabeledDataset

        ds = LabeledDataset(images=pixels.reshape(1, 1, 300, 3),
                            labels=np.zeros(1, dtype=np.int64), num_classes=1)
        h = build_histogram(ds)
        for eps in (0, 2, 7, 30):
            nbhd = neighborhood_map(h, eps)
            idx = rng.permutation(len(nbhd.values))[:80]
            for i in idx:
                assert nbhd.counts[i] == neighborhood_count_bruteforce(
                    pixels, nbhd.values[i], eps)
                checked += 1
    assert checked >= 1000
    _report(f"criterion 7d: SAT == brute force on {checked} queries")


def test_criterion_7e_idempotence_full_mnist_test_split():
    """Discretizing the full MNIST test split twice changes nothing."""
    _require_mnist()
    test = load_dataset("idx", DATA_DIR, "test")
    for disc in (Discretizer.binning(2),
                 Discretizer.from_codebook(Codebook(codes=np.array([[0], [255]])))):
        once = disc.apply_images(test.images)
        twice = disc.apply_images(once)
        assert np.array_equal(once, twice)
    _report("criterion 7e: discretization idempotent on full MNIST test split")


def test_criterion_7e_idempotence_synthetic_fallback():
    """Idempotence on a synthetic corpus (always runs, data or not)."""
    rng = np.random.default_rng(9)
    images = rng.integers(0, 256, size=(200, 28, 28, 1)).astype(np.uint8)
    for disc in (Discretizer.binning(2), Discretizer.binning(17),
                 Discretizer.from_codebook(Codebook(codes=np.array([[0], [91], [255]])))):
        once = disc.apply_images(images)
        assert np.array_equal(once, disc.apply_images(once))
    _report("criterion 7e (synthetic): discretization idempotent")


def test_supplementary_mnist_black_white_dominate():
    """On real MNIST, values 0 and 255 jointly outnumber all other values
    combined (the two-cluster structure the density codes rely on)."""
    _require_mnist()
    train = load_dataset("idx", DATA_DIR, "train")
    hist = build_histogram(train)
    extremes = int(hist.counts[0] + hist.counts[255])
    rest = hist.total_count - extremes
    assert extremes > rest
    _report(f"supplementary: MNIST extremes {extremes} > middle {rest}")
