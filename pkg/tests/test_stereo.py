import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stereolane.stereo import (StereoConfig, as_gray, block_sum, build_integral, compute_disparity,
                               estimate_disparity_naive, estimate_disparity_srp, lrc_check, ncc_cost,
                               precompute_stats, propagated_range)
from stereolane.testkit import (oracle_block_stats, oracle_block_sum, oracle_disparity_full, oracle_integral,
                                oracle_ncc_direct, value_noise)

unit = st.floats(0.0, 1.0, allow_nan=False)


def textured(shape, seed, cell=3):
    rng = np.random.default_rng(seed)
    return np.clip(0.5 + 0.4 * value_noise(shape, cell, rng) + rng.normal(0, 0.02, shape), 0, 1)


# integral image ---------------------------------------------------------------

def test_integral_single_pixel():
    assert build_integral(np.array([[0.5]])).tolist() == [[0.5]]


def test_integral_all_ones():
    integ = build_integral(np.ones((3, 3)))
    assert integ[2, 2] == 9 and integ[0, 0] == 1


def test_integral_2x2_frozen():
    assert build_integral(np.array([[1, 2], [3, 4]], dtype=np.int64)).tolist() == [[1, 3], [4, 10]]


def test_integral_empty_rejected():
    with pytest.raises(ValueError):
        build_integral(np.zeros((0, 4)))


@given(arrays(np.int64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 255)))
def test_integral_matches_prefix_oracle(img):
    integ = build_integral(img)
    assert np.array_equal(integ, oracle_integral(img))
    assert np.all(np.diff(integ, axis=0) >= 0) and np.all(np.diff(integ, axis=1) >= 0)


@given(st.integers(0, 3), st.data())
def test_block_sum_exact_for_integers(rho, data):
    h, w = data.draw(st.integers(2 * rho + 1, 20)), data.draw(st.integers(2 * rho + 1, 20))
    img = data.draw(arrays(np.int64, (h, w), elements=st.integers(0, 255)))
    u = data.draw(st.integers(rho, w - rho - 1))
    v = data.draw(st.integers(rho, h - rho - 1))
    assert block_sum(build_integral(img), u, v, rho) == oracle_block_sum(img, u, v, rho)


def test_block_sum_examples(rng):
    assert block_sum(build_integral(np.ones((5, 5))), 2, 2, 1) == 9
    img = rng.uniform(0, 1, (16, 16))
    integ = build_integral(img)
    assert block_sum(integ, 7, 4, 0) == pytest.approx(img[4, 7], abs=1e-12)
    for u, v in [(2, 2), (8, 9), (13, 13)]:
        assert abs(block_sum(integ, u, v, 2) - oracle_block_sum(img, u, v, 2)) < 1e-9


def test_block_sum_out_of_bounds():
    integ = build_integral(np.ones((6, 6)))
    with pytest.raises(IndexError):
        block_sum(integ, 0, 3, 1)


# block statistics -------------------------------------------------------------

def test_stats_constant_image():
    st_ = precompute_stats(np.full((9, 9), 0.3), 2)
    inner = (slice(2, 7), slice(2, 7))
    assert np.allclose(st_.mu[inner], 0.3) and np.allclose(st_.sigma[inner], 0.0, atol=1e-7)


def test_stats_horizontal_ramp():
    img = np.tile(np.arange(20) / 255.0, (10, 1))
    st_ = precompute_stats(img, 1)
    assert np.allclose(st_.mu[1:-1, 1:-1], img[1:-1, 1:-1], atol=1e-12)
    assert np.allclose(st_.sigma[1:-1, 1:-1], math.sqrt(2 / 3) / 255, atol=1e-9)


@given(st.integers(0, 3), st.integers(0, 10_000))
def test_stats_match_direct_formula(rho, seed):
    img = np.random.default_rng(seed).uniform(0, 1, (12, 14))
    st_ = precompute_stats(img, rho)
    assert np.all(st_.sigma >= 0)
    for v in range(rho, 12 - rho, 3):
        for u in range(rho, 14 - rho, 3):
            mu, sd = oracle_block_stats(img, u, v, rho)
            assert abs(st_.mu[v, u] - mu) < 1e-9 and abs(st_.sigma[v, u] - sd) < 1e-9


def test_stats_image_too_small():
    with pytest.raises(ValueError):
        precompute_stats(np.zeros((4, 4)), 2)


# NCC --------------------------------------------------------------------------

def _ncc_at(left, right, u, v, d, rho):
    return ncc_cost(left, right, precompute_stats(left, rho), precompute_stats(right, rho), u, v, d)


def test_ncc_perfect_shift():
    left = textured((20, 30), 0)
    right = np.zeros_like(left)
    right[:, :-4] = left[:, 4:]
    assert _ncc_at(left, right, 15, 10, 4, 2) == pytest.approx(1.0, abs=1e-9)


def test_ncc_affine_gain():
    left = textured((12, 12), 1) * 0.4
    right = 2 * left + 0.04
    assert _ncc_at(left, right, 6, 6, 0, 3) == pytest.approx(1.0, abs=1e-9)


def test_ncc_flat_block_is_unmatchable():
    left = textured((12, 12), 2)
    right = np.full_like(left, 0.5)
    assert _ncc_at(left, right, 6, 6, 0, 2) is None


@given(st.integers(1, 3), st.integers(0, 2 ** 31), st.floats(0.1, 3.0), st.floats(-0.5, 0.5))
def test_ncc_factorised_equals_direct_and_affine_invariant(rho, seed, a, b):
    rng = np.random.default_rng(seed)
    k = 2 * rho + 1
    left, right = rng.uniform(0, 1, (k, k)), rng.uniform(0, 1, (k, k))
    c = _ncc_at(left, right, rho, rho, 0, rho)
    assert c == pytest.approx(oracle_ncc_direct(left, right), abs=1e-6)
    assert -1 - 1e-9 <= c <= 1 + 1e-9
    assert oracle_ncc_direct(left, a * right + b) == pytest.approx(c, abs=1e-6)


# matching ---------------------------------------------------------------------

def test_identical_images_give_zero_disparity():
    img = textured((30, 40), 3)
    d = estimate_disparity_srp(img, img, StereoConfig(rho=2, d_max=8))
    assert np.all(d == 0)


def test_uniform_shift_recovered():
    left = textured((48, 80), 4)
    right = textured((48, 80), 5)
    right[:, :-5] = left[:, 5:]
    d = estimate_disparity_srp(left, right, StereoConfig(rho=3, d_max=12))
    inner = d[3:-3, 5 + 3 + 12:-3]
    assert np.mean(inner == 5) >= 0.99


def test_propagated_range_example():
    assert propagated_range([5, 5, 6], 1, 0, 64) == {4, 5, 6, 7}
    assert propagated_range([0, 1, 1], 1, 0, 64) == {0, 1, 2}
    assert propagated_range([-1, -1, -1], 1, 0, 3) == {0, 1, 2, 3}


@pytest.mark.parametrize("seed", range(3))
def test_srp_with_wide_tau_equals_oracle(seed):
    left = textured((24, 36), 10 + seed)
    right = textured((24, 36), 20 + seed)
    right[:, :-3] = left[:, 3:]
    cfg = StereoConfig(rho=2, d_max=7, tau=7)
    expect = oracle_disparity_full(left, right, 2, 0, 7)
    assert np.array_equal(estimate_disparity_srp(left, right, cfg), expect)
    assert np.array_equal(estimate_disparity_naive(left, right, cfg), expect)


def test_memo_and_naive_agree_under_propagation():
    left = textured((40, 50), 7)
    right = textured((40, 50), 8)
    right[:, :-6] = left[:, 6:]
    cfg = StereoConfig(rho=3, d_max=10, tau=1)
    for ref in ("left", "right"):
        a = estimate_disparity_srp(left, right, cfg, reference=ref)
        b = estimate_disparity_naive(left, right, cfg, reference=ref, full_search=False)
        assert np.array_equal(a, b)
        assert a.min() >= 0 and a.max() <= cfg.d_max


def test_config_validation():
    for bad in (dict(d_min=-1), dict(d_max=0), dict(tau=-1), dict(sigma_floor=0.0), dict(rho=-1)):
        with pytest.raises(ValueError):
            StereoConfig(**bad)


def test_as_gray():
    assert as_gray(np.array([[0, 255]], dtype=np.uint8)).tolist() == [[0.0, 1.0]]
    with pytest.raises(ValueError):
        as_gray(np.array([[1.5]]))
    with pytest.raises(ValueError):
        as_gray(np.zeros(4))


def test_mismatched_shapes_rejected():
    with pytest.raises(ValueError):
        estimate_disparity_srp(np.zeros((10, 10)), np.zeros((10, 11)), StereoConfig(rho=1, d_max=3))


# LRC --------------------------------------------------------------------------

def test_lrc_consistent_maps_pass():
    lf = np.zeros((4, 12), dtype=np.int64)
    lf[:, 4:] = 3
    rt = np.zeros_like(lf)
    rt[:, 1:9] = 3
    assert np.array_equal(lrc_check(lf, rt, 3), lf)


def test_lrc_examples():
    lf = np.zeros((8, 16), dtype=np.int64)
    rt = np.zeros_like(lf)
    lf[5, 10], rt[5, 6] = 4, 8
    lf[5, 2] = 7
    out = lrc_check(lf, rt, 3)
    assert out[5, 10] == 0 and out[5, 2] == 0


@given(st.integers(0, 2 ** 31), st.integers(0, 5))
def test_lrc_never_invents_values(seed, tr):
    rng = np.random.default_rng(seed)
    lf = rng.integers(0, 8, (6, 15))
    rt = rng.integers(0, 8, (6, 15))
    out = lrc_check(lf, rt, tr)
    assert np.all((out == 0) | (out == lf))


def test_threads_do_not_change_disparity():
    left = textured((40, 60), 9)
    right = textured((40, 60), 10)
    right[:, :-4] = left[:, 4:]
    cfg = StereoConfig(rho=2, d_max=8)
    a = compute_disparity(left, right, cfg, threads=1).disparity
    b = compute_disparity(left, right, cfg, threads=4).disparity
    assert np.array_equal(a, b)
