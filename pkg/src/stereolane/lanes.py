"""Lane position validation against the dense vanishing-point field."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .preprocess import SOBEL_DIFF, SOBEL_SMOOTH, EdgeSet, GradientField, _conv_separable
from .vanish import VanishingField, extended_axis

ANGLE_STEP = math.pi / 36
ANGLE_LIMIT = math.pi / 6


def angle_gap(a, b):
    """Absolute angle between two undirected orientations, in [0, pi/2]."""
    d = np.mod(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)), np.pi)
    return np.minimum(d, np.pi - d)


def piecewise_weight(theta_e, theta_vp, sigma_g: float = 3.5):
    """Gaussian-in-steps weight for orientation agreement, zero past pi/6."""
    gap = angle_gap(theta_e, theta_vp)
    w = np.where(gap <= ANGLE_LIMIT, np.exp(-(gap / sigma_g ** 2) / ANGLE_STEP), 0.0)
    return float(w) if np.ndim(w) == 0 else w


def edge_weights(edges: EdgeSet, field: VanishingField, sigma_g: float = 3.5) -> np.ndarray:
    """w_g for each edge pixel.

    The edge runs perpendicular to its gradient; it is compared with the
    ray from the pixel to the vanishing point of its row.
    """
    if len(edges) == 0:
        return np.zeros(0)
    vx = field.vpx[edges.v]
    vy = field.vpy[edges.v]
    ray = np.arctan2(vy - edges.v, vx - edges.u)
    w = piecewise_weight(edges.theta + np.pi / 2, ray, sigma_g)
    w = np.asarray(w, dtype=np.float64)
    w[~(np.isfinite(vx) & np.isfinite(vy))] = 0.0
    return w


def box_sum(a: np.ndarray, nu: int, varsigma: int) -> np.ndarray:
    """Sum over a (2*nu+1) wide by (2*varsigma+1) tall box, zero padded."""
    h, w = a.shape
    p = np.pad(a, ((varsigma, varsigma), (nu, nu)))
    out = np.zeros_like(a, dtype=np.float64)
    for y in range(2 * varsigma + 1):
        for x in range(2 * nu + 1):
            out += p[y:y + h, x:x + w]
    return out


def build_m0(grad: GradientField, edges: EdgeSet, field: VanishingField, nu: int = 1,
             varsigma: int = 3, sigma_g: float = 3.5) -> np.ndarray:
    """Box-accumulated w_g * G_x; non-edge pixels carry zero weight."""
    weighted = np.zeros_like(grad.gx)
    if len(edges):
        weighted[edges.v, edges.u] = grad.gx[edges.v, edges.u] * edge_weights(edges, field, sigma_g)
    return box_sum(weighted, nu, varsigma)


def build_m1(m0: np.ndarray) -> np.ndarray:
    """Sobel horizontal derivative of m0 (true convolution, zero padded)."""
    return _conv_separable(np.asarray(m0, dtype=np.float64), SOBEL_SMOOTH, SOBEL_DIFF, "zero")


def lane_tracks(u_bottom, field: VanishingField, min_den: float = 0.5) -> np.ndarray:
    """Columns of the tracks starting at ``u_bottom`` on row v_max.

    Returns an array of shape (v_max + 1, len(u_bottom)); rows above the
    horizon, and rows past a near-singular step, are NaN.
    """
    u0 = np.atleast_1d(np.asarray(u_bottom, dtype=np.float64))
    out = np.full((field.v_max + 1, len(u0)), np.nan)
    out[field.v_max] = u0
    u = u0.copy()
    for v in range(field.v_max - 1, field.horizon - 1, -1):
        vpx = field.vpx[v + 1]
        den = v + 1 - field.vpy[v + 1]
        if not (np.isfinite(den) and np.isfinite(vpx)) or abs(den) < min_den:
            break
        # Same line as (vpx + v*u - vpy*u) / (v + 1 - vpy); this form keeps u == vpx exact.
        u = u + (vpx - u) / den
        out[v] = u
    return out


def lane_track(u_bottom: float, field: VanishingField, min_den: float = 0.5):
    """(rows, columns) of a single track, bottom row first, truncated at a singular row."""
    col = lane_tracks([u_bottom], field, min_den)[:, 0]
    rows = np.arange(field.v_max, field.horizon - 1, -1)
    u = col[rows]
    ok = np.isfinite(u)
    return rows[ok], u[ok]


@dataclass
class EnergyHistogram:
    values: np.ndarray
    offset: int

    def start_column(self, index: int) -> int:
        return index - self.offset


def _aggregate_chunk(m1, tracks, horizon, v_max, lambda_g):
    h, w = m1.shape
    e = np.zeros(tracks.shape[1])
    for v in range(v_max, horizon - 1, -1):
        u = tracks[v]
        ok = np.isfinite(u)
        sample = np.zeros(len(u))
        if v < h:
            col = np.full(len(u), -1, dtype=np.int64)
            col[ok] = np.floor(u[ok] + 0.5).astype(np.int64)
            inside = ok & (col >= 0) & (col < w)
            sample[inside] = m1[v, col[inside]]
        e = np.where(ok, sample + lambda_g * e, e)
    return e


def aggregate_energy(m1: np.ndarray, field: VanishingField, xi: float = 0.5,
                     lambda_g: float = 1.0, threads: int = 1) -> EnergyHistogram:
    """Energy of every candidate track, indexed by bottom-row start column."""
    h, w = m1.shape
    offset, n = extended_axis(w, xi)
    starts = np.arange(n) - offset
    tracks = lane_tracks(starts, field)
    if threads <= 1:
        vals = _aggregate_chunk(m1, tracks, field.horizon, field.v_max, lambda_g)
    else:
        parts = np.array_split(np.arange(n), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            jobs = [pool.submit(_aggregate_chunk, m1, tracks[:, p], field.horizon, field.v_max, lambda_g)
                    for p in parts]
            vals = np.concatenate([j.result() for j in jobs])
    return EnergyHistogram(values=vals, offset=offset)


@dataclass
class Lane:
    start: int
    energy: float
    rows: np.ndarray
    cols: np.ndarray


@dataclass
class LaneSet:
    lanes: list[Lane] = field(default_factory=list)

    def __len__(self):
        return len(self.lanes)

    @property
    def starts(self) -> list[int]:
        return [lane.start for lane in self.lanes]


def local_minima(values: np.ndarray) -> np.ndarray:
    h = np.asarray(values)
    if len(h) < 3:
        return np.zeros(0, dtype=np.int64)
    i = np.arange(1, len(h) - 1)
    return i[(h[i] < h[i - 1]) & (h[i] < h[i + 1])]


def default_tr_lpv(m1: np.ndarray, n_rows: int, factor: float = 0.15, percentile: float = 99.0) -> float:
    return -factor * n_rows * float(np.percentile(np.abs(m1), percentile))


def select_lanes(hist: EnergyHistogram, tr_lpv: float, min_lane_sep: int = 20,
                 field: VanishingField | None = None) -> LaneSet:
    """Strict local minima below ``tr_lpv``, close pairs resolved by energy."""
    vals = hist.values
    cand = [int(i) for i in local_minima(vals) if vals[i] < tr_lpv]
    cand.sort(key=lambda i: (vals[i], i))
    kept: list[int] = []
    for i in cand:
        if all(abs(i - k) >= min_lane_sep for k in kept):
            kept.append(i)
    lanes = []
    for i in kept:
        start = hist.start_column(i)
        if field is not None:
            rows, cols = lane_track(start, field)
        else:
            rows, cols = np.zeros(0, dtype=np.int64), np.zeros(0)
        lanes.append(Lane(start=start, energy=float(vals[i]), rows=rows, cols=cols))
    return LaneSet(lanes=lanes)
