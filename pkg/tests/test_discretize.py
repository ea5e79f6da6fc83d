import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixeldisc.codebook import binning_levels
from pixeldisc.core import Codebook, ConfigError, Image
from pixeldisc.discretize import (
    Discretizer,
    SurrogateConfig,
    discretize_image,
    surrogate_value,
)


def gray_image(values):
    return Image(np.asarray(values, dtype=np.uint8)[None, :, None])


# ----------------------------------------------------------------- binning T

def test_binning_k2_rounds_up_at_point_six():
    # 153/255 = 0.6 -> floor(1*0.6 + 0.5)/1 = 1 -> level 255
    d = Discretizer.binning(2)
    out = discretize_image(gray_image([153]), d)
    assert out.pixels[0, 0, 0] == 255


def test_binning_k256_is_identity():
    d = Discretizer.binning(256)
    img = gray_image(list(range(256)))
    out = discretize_image(img, d)
    assert np.array_equal(out.pixels, img.pixels)


def test_binning_applies_per_channel_on_rgb():
    d = Discretizer.binning(2)
    img = Image(np.array([[[10, 200, 130]]], dtype=np.uint8))
    out = discretize_image(img, d)
    assert out.pixels[0, 0].tolist() == [0, 255, 255]


@given(st.integers(2, 256), st.lists(st.integers(0, 255), min_size=1, max_size=20))
def test_binning_idempotent(k, values):
    d = Discretizer.binning(k)
    once = discretize_image(gray_image(values), d)
    twice = discretize_image(once, d)
    assert np.array_equal(once.pixels, twice.pixels)


@given(st.integers(2, 256), st.integers(0, 255))
def test_binning_outputs_are_levels(k, v):
    d = Discretizer.binning(k)
    out = discretize_image(gray_image([v]), d)
    assert out.pixels[0, 0, 0] in set(binning_levels(k).tolist())


def test_binning_matches_unit_scale_formula():
    # floor((k-1)*x + 0.5)/(k-1) evaluated in exact rational arithmetic
    from fractions import Fraction

    for k in (2, 3, 8, 17):
        d = Discretizer.binning(k)
        lv = binning_levels(k)
        for v in range(256):
            x = Fraction(v, 255)
            t = math.floor((k - 1) * x + Fraction(1, 2))
            out = discretize_image(gray_image([v]), d).pixels[0, 0, 0]
            assert out == lv[t]


# ----------------------------------------------------------- codebook-mode T

def test_codebook_nearest_and_tie():
    cb = Codebook(codes=np.array([[0], [255]]))
    d = Discretizer.from_codebook(cb)
    assert discretize_image(gray_image([100]), d).pixels[0, 0, 0] == 0
    assert discretize_image(gray_image([200]), d).pixels[0, 0, 0] == 255


@given(st.lists(st.integers(0, 255), min_size=1, max_size=30))
def test_codebook_idempotent(values):
    cb = Codebook(codes=np.array([[0], [64], [129], [255]]))
    d = Discretizer.from_codebook(cb)
    once = discretize_image(gray_image(values), d)
    twice = discretize_image(once, d)
    assert np.array_equal(once.pixels, twice.pixels)


def test_codebook_rgb_matches_per_pixel_nearest():
    rng = np.random.default_rng(4)
    codes = rng.integers(0, 256, size=(5, 3)).astype(np.int16)
    cb = Codebook(codes=np.unique(codes, axis=0))
    d = Discretizer.from_codebook(cb)
    img = Image(rng.integers(0, 256, size=(3, 4, 3)).astype(np.uint8))
    out = discretize_image(img, d)
    from pixeldisc.core import nearest_code

    for i in range(3):
        for j in range(4):
            idx, _ = nearest_code(tuple(int(v) for v in img.pixels[i, j]), cb)
            assert out.pixels[i, j].tolist() == cb.codes[idx].tolist()


def test_from_codebook_roundtrips_binning_source():
    from pixeldisc.codebook import binning_codes

    d = Discretizer.from_codebook(binning_codes(4))
    assert d.mode == "binning" and d.k == 4
    assert d.per_pixel_outcomes(3) == 64
    cb = Codebook(codes=np.array([[0, 0, 0], [9, 9, 9]]))
    assert Discretizer.from_codebook(cb).per_pixel_outcomes(3) == 2


# ------------------------------------------------------------------ surrogate

def test_surrogate_direct_formula_alpha_10():
    # x=0.6, codes {0,1}: (0*e^-6 + 1*e^-4) / (e^-6 + e^-4) = 1/(1+e^-2)
    cfg = SurrogateConfig(alpha=10.0)
    got = surrogate_value((153,), np.array([0.0, 1.0]), cfg)
    assert got[0] == pytest.approx(1.0 / (1.0 + math.exp(-2.0)), abs=1e-9)
    assert got[0] == pytest.approx(0.8807970779778823, abs=1e-6)


def test_surrogate_huge_alpha_equals_discretization():
    cfg = SurrogateConfig(alpha=1e6)
    got = surrogate_value((153,), np.array([0.0, 1.0]), cfg)
    assert got[0] == pytest.approx(1.0, abs=1e-9)


def test_surrogate_tiny_alpha_is_code_mean():
    cfg = SurrogateConfig(alpha=1e-9)
    for v in (0, 77, 200):
        got = surrogate_value((v,), np.array([0.0, 1.0]), cfg)
        assert got[0] == pytest.approx(0.5, abs=1e-6)


def test_surrogate_alpha_zero_rejected():
    with pytest.raises(ConfigError):
        SurrogateConfig(alpha=0.0)


def test_surrogate_per_pixel_vector_uses_linf():
    codes01 = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    cfg = SurrogateConfig(alpha=1e6, scope="per_pixel_vector")
    got = surrogate_value((200, 10, 10), codes01, cfg)
    # linf distance to black is 200/255, to white 245/255: black wins
    assert np.allclose(got, [0.0, 0.0, 0.0], atol=1e-9)


@given(st.integers(0, 255), st.floats(0.5, 50.0))
def test_surrogate_stays_in_code_hull(v, alpha):
    codes01 = np.array([0.2, 0.5, 0.9])
    got = surrogate_value((v,), codes01, SurrogateConfig(alpha=alpha))[0]
    assert 0.2 - 1e-12 <= got <= 0.9 + 1e-12


@settings(deadline=None)
@given(st.integers(2, 17))
def test_surrogate_converges_to_binning(k):
    """|g - T| at alpha = 1e6 is tiny for every lattice pixel; deviations
    shrink monotonically through alpha = 10, 1e2, 1e4, 1e6 past the knee."""
    d = Discretizer.binning(k)
    codes01 = d.surrogate_codes()
    lv = binning_levels(k).astype(np.float64) / 255.0
    alphas = [10.0, 1e2, 1e4, 1e6]
    max_dev = []
    for alpha in alphas:
        cfg = SurrogateConfig(alpha=alpha)
        devs = []
        for v in range(256):
            t = discretize_image(gray_image([v]), d).pixels[0, 0, 0] / 255.0
            g = surrogate_value((v,), codes01, cfg)[0]
            # compare g against the exact rational level, not its lattice
            # rounding: the surrogate lives on the continuous [0,1] scale
            t_exact = codes01[np.argmin(np.abs(lv - t))]
            devs.append(abs(g - t_exact))
        max_dev.append(max(devs))
    assert max_dev[-1] < 1e-6
    assert all(b <= a + 1e-12 for a, b in zip(max_dev, max_dev[1:]))
