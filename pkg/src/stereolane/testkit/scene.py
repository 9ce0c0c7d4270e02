"""Synthetic stereo road scenes with full ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import zoom

from ..lanes import lane_tracks
from ..road import horizon_row, road_fn, vpy_profile
from ..vanish import VanishingField

DEFAULT_BETA = (-40.0, 0.4, 0.0005)
DEFAULT_SIZE = (640, 360)


def scaled_beta(height: int, beta=DEFAULT_BETA, ref_height: int = DEFAULT_SIZE[1]) -> tuple:
    """Rescale a road profile so it spans the same fraction of a shorter image."""
    s = height / ref_height
    b0, b1, b2 = beta
    return (b0 * s, b1, b2 / s)


@dataclass
class LaneTruth:
    bottom: float
    rows: np.ndarray
    cols: np.ndarray


@dataclass
class SyntheticScene:
    left: np.ndarray
    right: np.ndarray
    true_disparity: np.ndarray
    true_beta: np.ndarray
    true_vp: VanishingField
    true_lanes: list[LaneTruth]
    rng_seed: int
    d_max: int
    params: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.true_vp.horizon

    @property
    def lane_bottoms(self) -> list[float]:
        return [lane.bottom for lane in self.true_lanes]


def value_noise(shape, cell: int, rng: np.random.Generator) -> np.ndarray:
    """Bilinearly interpolated uniform noise in [-1, 1] with the given cell size."""
    h, w = shape
    gh, gw = h // cell + 2, w // cell + 2
    grid = rng.uniform(-1.0, 1.0, size=(gh, gw))
    up = zoom(grid, cell, order=1)
    return up[:h, :w]


def texture(shape, amplitude: float, rng: np.random.Generator, cell: int = 3) -> np.ndarray:
    """Single-octave value noise with lattice values in [-amplitude, amplitude]."""
    if amplitude == 0:
        return np.zeros(shape)
    return amplitude * value_noise(shape, cell, rng)


def _interval_coverage(cols, lo, hi):
    a = np.maximum(cols - 0.5, lo)
    b = np.minimum(cols + 0.5, hi)
    return np.clip(b - a, 0.0, 1.0)


SUBROWS = 8


def _at(track, y):
    """Linear interpolation of a per-row track at fractional row y."""
    i = int(np.floor(y))
    i0, i1 = max(i, 0), min(i + 1, len(track) - 1)
    a, b = track[i0], track[i1]
    if not np.isfinite(a):
        a = b
    if not np.isfinite(b):
        b = a
    return a + (b - a) * (y - i)


def _stripe_area(cols, row, lo_track, hi_track):
    """Pixel-area coverage of the region between two tracks, by sub-row sampling."""
    acc = np.zeros(len(cols))
    for k in range(SUBROWS):
        y = row - 0.5 + (k + 0.5) / SUBROWS
        acc += _interval_coverage(cols, _at(lo_track, y), _at(hi_track, y))
    return acc / SUBROWS


def gen_scene(width: int = DEFAULT_SIZE[0], height: int = DEFAULT_SIZE[1], beta=None,
              lanes=(200.0, 390.0, 580.0), vpx_center: float | None = None, vpx_shift: float = 40.0,
              texture_amp: float = 0.1, texture_cell: int = 3, noise_sigma: float = 0.02, seed: int = 0,
              lane_width: float = 6.0, road_level: float = 0.35, wall_level: float = 0.55,
              lane_level: float = 0.85, lane_texture_amp: float | None = None, wall_disparity: int = 1, d_max: int | None = None) -> SyntheticScene:
    """Render a rectified pair of a curved, non-flat road with painted lanes.

    The road disparity of row v is round(f(v)) for the parabola ``beta``;
    rows above the horizon belong to a textured far wall.  The horizontal
    vanishing point drifts quadratically by ``vpx_shift`` columns between
    the bottom row and the horizon, and each lane follows the track through
    that field from its bottom-row column.
    """
    if beta is None:
        beta = scaled_beta(height)
    beta = np.asarray(beta, dtype=np.float64)
    v_max = height - 1
    h0, flag = horizon_row(beta, v_max)
    if flag or h0 >= v_max - 10:
        raise ValueError(f"beta {beta.tolist()} has no usable horizon inside the image")
    rows = np.arange(h0, v_max + 1)
    slope = beta[1] + 2 * beta[2] * rows
    if np.any(slope <= 0):
        raise ValueError("road profile must increase towards the bottom row")
    f_bottom = float(road_fn(beta, v_max))
    if d_max is None:
        d_max = int(np.ceil(f_bottom)) + 8
    elif f_bottom > d_max:
        raise ValueError(f"road disparity {f_bottom:.1f} at the bottom row exceeds d_max={d_max}")

    rng = np.random.default_rng(seed)
    v_all = np.arange(height)
    row_disp = np.full(height, wall_disparity, dtype=np.int64)
    row_disp[h0:] = np.maximum(wall_disparity, np.rint(road_fn(beta, rows)).astype(np.int64))

    left = np.empty((height, width))
    tex = texture((height, width), texture_amp, rng, texture_cell)
    left[:h0] = wall_level + tex[:h0]
    left[h0:] = road_level + tex[h0:]

    if vpx_center is None:
        vpx_center = width / 2
    t = (v_max - rows) / max(v_max - h0, 1)
    vp = VanishingField.from_profiles(vpx_center + vpx_shift * t * t, vpy_profile(beta, rows), h0, v_max)

    truths = []
    cols = np.arange(width, dtype=np.float64)
    if lanes:
        bottoms = np.asarray(lanes, dtype=np.float64)
        tracks = lane_tracks(bottoms, vp)
        lo_tracks = tracks - lane_width / 2
        hi_tracks = tracks + lane_width / 2
        lane_tex = texture((height, width), 0.5 * texture_amp if lane_texture_amp is None else lane_texture_amp, rng,
                           texture_cell)
        paint_top = min(v_max, h0 + 4)
        for k, bottom in enumerate(lanes):
            r = np.arange(paint_top, v_max + 1)
            c = tracks[r, k]
            ok = np.isfinite(c)
            r = r[ok]
            for rr in r:
                cov = _stripe_area(cols, rr, lo_tracks[:, k], hi_tracks[:, k])
                if np.any(cov > 0):
                    left[rr] = (1 - cov) * left[rr] + cov * (lane_level + lane_tex[rr])
            full_rows = np.arange(h0, v_max + 1)
            truths.append(LaneTruth(bottom=float(bottom), rows=full_rows, cols=tracks[full_rows, k].copy()))

    right = np.empty_like(left)
    fresh = texture((height, width), texture_amp, rng, texture_cell)
    for v in v_all:
        d = int(row_disp[v])
        base = wall_level if v < h0 else road_level
        right[v] = base + fresh[v]
        if d < width:
            right[v, :width - d] = left[v, d:]

    true_disp = np.zeros((height, width), dtype=np.int64)
    for v in v_all:
        d = int(row_disp[v])
        true_disp[v, d:] = d

    if noise_sigma > 0:
        left = left + rng.normal(0.0, noise_sigma, left.shape)
        right = right + rng.normal(0.0, noise_sigma, right.shape)
    left = np.clip(left, 0.0, 1.0)
    right = np.clip(right, 0.0, 1.0)

    params = dict(width=width, height=height, beta=beta.tolist(), lanes=[float(x) for x in lanes or ()],
                  vpx_center=float(vpx_center), vpx_shift=float(vpx_shift), texture_amp=texture_amp, texture_cell=texture_cell,
                  noise_sigma=noise_sigma, seed=seed, lane_width=lane_width, d_max=d_max)
    return SyntheticScene(left=left, right=right, true_disparity=true_disp, true_beta=beta,
                          true_vp=vp, true_lanes=truths, rng_seed=seed, d_max=d_max, params=params)


def random_scene_params(seed: int, width: int = DEFAULT_SIZE[0], height: int = DEFAULT_SIZE[1],
                        min_lanes: int = 2, max_lanes: int = 4, min_gap: float = 70.0,
                        bottom_disparity=(76.0, 92.0), min_slope: float = 0.2) -> dict:
    """Jittered road profile, vanishing-point drift and 2-4 lane positions.

    The default profile is rescaled so the bottom-row disparity falls in
    ``bottom_disparity`` while the slope at the horizon stays above
    ``min_slope`` px/row.  Lanes are kept further apart than the bottom-row
    disparity, i.e. lane spacing is wider than the stereo baseline.
    """
    rng = np.random.default_rng(10_000 + seed)
    b0, b1, b2 = scaled_beta(height)
    for _ in range(1000):
        beta = np.array([b0 * rng.uniform(0.9, 1.1), b1 * rng.uniform(0.9, 1.1), b2 * rng.uniform(0.6, 1.4)])
        beta = beta * (rng.uniform(*bottom_disparity) / float(road_fn(beta, height - 1)))
        h0, _ = horizon_row(beta, height - 1)
        if beta[1] + 2 * beta[2] * h0 >= min_slope:
            break
    f_bottom = float(road_fn(beta, height - 1))
    gap = max(min_gap, 1.25 * f_bottom)
    lo, hi = f_bottom + 30.0, width - 30.0
    n = int(rng.integers(min_lanes, max_lanes + 1))
    for _ in range(1000):
        pos = np.sort(rng.uniform(lo, hi, size=n))
        if n == 1 or np.min(np.diff(pos)) >= gap:
            break
    else:
        pos = np.linspace(lo, hi, n)
    return dict(width=width, height=height, beta=tuple(float(b) for b in beta), lanes=tuple(float(p) for p in pos),
                vpx_center=width / 2 + rng.uniform(-0.08, 0.08) * width,
                vpx_shift=rng.uniform(-60.0, 60.0), seed=seed)


def scene_suite(n: int = 20, **kw) -> list[SyntheticScene]:
    return [gen_scene(**random_scene_params(s, **kw)) for s in range(n)]
