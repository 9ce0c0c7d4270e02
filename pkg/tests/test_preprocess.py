import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.ndimage import correlate

from stereolane.preprocess import bilateral_filter, edge_map, median_filter, road_mask, sobel_gradients
from stereolane.road import RoadProfile, road_fn
from stereolane.testkit import oracle_bilateral

BETA = (-40.0, 0.4, 0.0005)


def test_road_mask_examples():
    prof = RoadProfile.from_beta(BETA, 359)
    disp = np.zeros((360, 4), dtype=np.int64)
    f = road_fn(BETA, np.arange(360))
    disp[:, 0] = np.rint(np.maximum(f, 1))
    disp[:, 1] = np.rint(f + 4)
    disp[:50, 2] = 30
    m = road_mask(disp, prof, 3)
    assert m[prof.horizon_row + 1:, 0].all()
    assert not m[prof.horizon_row:, 1].any()
    assert not m[:prof.horizon_row, :].any()
    assert not m[:, 3].any()  # invalid pixels


@given(st.integers(0, 2 ** 31), st.floats(0.5, 5))
def test_road_mask_invariant(seed, varpi):
    prof = RoadProfile.from_beta(BETA, 359)
    disp = np.random.default_rng(seed).integers(0, 180, (360, 8))
    m = road_mask(disp, prof, varpi)
    v, _ = np.nonzero(m)
    assert np.all(np.abs(disp[m] - road_fn(BETA, v)) <= varpi)
    assert np.all(v >= prof.horizon_row) and np.all(disp[m] > 0)


# bilateral -------------------------------------------------------------------

def test_bilateral_constant_fixed_point():
    img = np.full((20, 17), 0.42)
    assert np.array_equal(bilateral_filter(img), img)


def test_bilateral_single_pixel():
    assert bilateral_filter(np.array([[0.7]])).tolist() == [[0.7]]


def test_bilateral_matches_oracle(rng):
    img = rng.uniform(0, 1, (32, 32))
    out = bilateral_filter(img, 300.0, 0.3, 5)
    assert np.max(np.abs(out - oracle_bilateral(img, 300.0, 0.3, 5))) < 1e-9


def test_bilateral_threads_identical(rng):
    img = rng.uniform(0, 1, (40, 30))
    assert np.array_equal(bilateral_filter(img, threads=1), bilateral_filter(img, threads=4))


@given(st.integers(0, 2 ** 31), st.integers(1, 5))
def test_bilateral_convex_combination(seed, rho):
    img = np.random.default_rng(seed).uniform(0, 1, (14, 15))
    out = bilateral_filter(img, 3.0, 0.2, rho)
    p = np.pad(img, rho, mode="reflect")
    k = 2 * rho + 1
    win = np.lib.stride_tricks.sliding_window_view(p, (k, k))
    assert np.all(out >= win.min(axis=(2, 3)) - 1e-12)
    assert np.all(out <= win.max(axis=(2, 3)) + 1e-12)


def test_bilateral_large_range_sigma_is_gaussian_blur(rng):
    img = rng.uniform(0, 1, (25, 25))
    y, x = np.mgrid[-5:6, -5:6]
    k = np.exp(-(x * x + y * y) / 3.0 ** 2)
    ref = correlate(img, k / k.sum(), mode="mirror")
    assert np.max(np.abs(bilateral_filter(img, 3.0, 1e6, 5) - ref)) < 1e-6


def noisy_step(seed):
    rng = np.random.default_rng(seed)
    img = np.full((40, 40), 0.3)
    img[:, 20:] = 0.7
    return np.clip(img + rng.normal(0, 0.05, img.shape), 0, 1)


@pytest.mark.parametrize("seed", range(5))
def test_bilateral_keeps_edge_sharper_than_median(seed):
    img = noisy_step(seed)
    gb = np.abs(sobel_gradients(bilateral_filter(img)).gx[5:-5, 19:21]).max(axis=1)
    gm = np.abs(sobel_gradients(median_filter(img)).gx[5:-5, 19:21]).max(axis=1)
    assert np.median(gb) >= np.median(gm)


# Sobel and edges ---------------------------------------------------------------

def test_sobel_constant():
    g = sobel_gradients(np.full((6, 7), 0.5))
    assert not g.gx.any() and not g.gy.any()


def test_sobel_vertical_step():
    img = np.zeros((8, 10))
    img[:, 5:] = 0.25
    g = sobel_gradients(img)
    assert np.allclose(np.abs(g.gx[:, 4:6]), 1.0)  # 4h
    assert np.allclose(g.gx[:, :4], 0) and np.allclose(g.gy, 0)
    assert np.all(g.gx[:, 4:6] > 0)  # dark to light, left to right


def test_sobel_horizontal_step():
    img = np.zeros((10, 8))
    img[5:] = 0.25
    g = sobel_gradients(img)
    assert np.allclose(np.abs(g.gy[4:6]), 1.0) and np.allclose(g.gx, 0)


def test_sobel_too_small():
    with pytest.raises(ValueError):
        sobel_gradients(np.zeros((2, 5)))


@given(st.integers(0, 2 ** 31))
def test_gradient_field_invariants(seed):
    g = sobel_gradients(np.random.default_rng(seed).uniform(0, 1, (9, 11)))
    assert np.allclose(g.magnitude ** 2, g.gx ** 2 + g.gy ** 2, atol=1e-9)
    assert np.all(g.theta > -np.pi) and np.all(g.theta <= np.pi)


def test_edge_map_empty_mask(rng):
    g = sobel_gradients(rng.uniform(0, 1, (10, 10)))
    assert len(edge_map(g, 0.1, np.zeros((10, 10), bool))) == 0


def test_edge_map_step_included():
    img = np.zeros((8, 10))
    img[:, 5:] = 0.8
    g = sobel_gradients(img)
    e = edge_map(g, 100 / 255, np.ones((8, 10), bool))
    assert set(e.u.tolist()) == {4, 5}


@given(st.integers(0, 2 ** 31), st.floats(0, 2), st.floats(0, 2))
def test_edge_map_predicates_and_monotone(seed, t1, t2):
    rng = np.random.default_rng(seed)
    g = sobel_gradients(rng.uniform(0, 1, (12, 12)))
    mask = rng.random((12, 12)) < 0.6
    e = edge_map(g, t1, mask)
    assert np.array_equal(e.to_mask((12, 12)), (g.magnitude >= t1) & mask)
    lo, hi = sorted((t1, t2))
    full = np.ones((12, 12), bool)
    assert not np.any(edge_map(g, hi, full).to_mask((12, 12)) & ~edge_map(g, lo, full).to_mask((12, 12)))
