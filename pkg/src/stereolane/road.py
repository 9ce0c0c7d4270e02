"""Vertical road profile from the v-disparity histogram."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RansacError, SingularProfileError
from .polyfit import PolyFit, RansacConfig, RansacResult, fit_poly, ransac_poly

MAX_ROW_STEP = 6


def build_vdisparity(disp: np.ndarray, d_max: int | None = None) -> np.ndarray:
    """Histogram ``m[v, d]``: how many pixels of row v carry disparity d.

    Bin 0 is the invalid marker and is never counted.
    """
    disp = np.asarray(disp)
    if d_max is None:
        d_max = int(disp.max()) if disp.size else 0
    h, _ = disp.shape
    hist = np.zeros((h, d_max + 1), dtype=np.int64)
    rows, cols = np.nonzero((disp >= 1) & (disp <= d_max))
    np.add.at(hist, (rows, disp[rows, cols].astype(np.int64)), 1)
    return hist


@dataclass
class DpPath:
    """Minimal-energy path, one point per DP stage.

    ``points`` is an (k, 2) int array of (axis coordinate, row) pairs: (d, v)
    for the v-disparity path, (u, v) for the vanishing-point path.
    ``support`` is the data term magnitude at each point.
    """

    points: np.ndarray
    energy: float
    backtrace: np.ndarray
    support: np.ndarray
    empty: bool = False


def _penalty(tau, lam, paper_sign):
    return -lam * tau if paper_sign else lam * tau


def dp_extract_vpath(hist: np.ndarray, lambda_y: float = 30.0, paper_sign: bool = False,
                     max_step: int = MAX_ROW_STEP) -> DpPath:
    """Road projection path through the v-disparity histogram.

    Stages run from d = d_max down to d = 0.  A cell (d, v) links to stage
    d + 1 at row v + tau, tau in [0, max_step]: nearer road (larger d) sits
    lower in the image.  Ties prefer the smaller tau, then the smaller row.
    """
    m = np.asarray(hist, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("histogram must be a non-empty 2D array")
    h, nb = m.shape
    d_max = nb - 1
    energy = np.empty((nb, h))
    back = np.full((nb, h), -1, dtype=np.int64)
    energy[d_max] = -m[:, d_max]
    for d in range(d_max - 1, -1, -1):
        nxt = energy[d + 1]
        best = np.full(h, np.inf)
        arg = np.full(h, -1, dtype=np.int64)
        for tau in range(max_step + 1):
            cand = np.full(h, np.inf)
            if tau < h:
                cand[:h - tau] = nxt[tau:] + _penalty(tau, lambda_y, paper_sign)
            better = cand < best
            best[better] = cand[better]
            arg[better] = tau
        energy[d] = -m[:, d] + best
        back[d] = np.arange(h) + arg
    v = int(np.argmin(energy[0]))
    total = float(energy[0, v])
    rows = [v]
    for d in range(0, d_max):
        v = int(back[d, v])
        rows.append(v)
    ds = np.arange(nb)
    rows = np.array(rows, dtype=np.int64)
    pts = np.stack([ds, rows], axis=1)
    support = m[rows, ds]
    return DpPath(points=pts, energy=total, backtrace=back, support=support,
                  empty=not np.any(m))


def fit_parabola_lsq(points) -> np.ndarray:
    """Least-squares beta for d = b0 + b1 v + b2 v^2 from (d, v) pairs."""
    pts = np.asarray(points, dtype=np.float64)
    return fit_poly(pts[:, 1], pts[:, 0], 2).coef


def ransac_beta(points, cfg: RansacConfig | None = None) -> RansacResult:
    """Robust parabola through (d, v) path points."""
    if cfg is None:
        cfg = RansacConfig(tolerance=4.0, inlier_fraction=0.99, sample_size=3)
    pts = np.asarray(points.points if isinstance(points, DpPath) else points, dtype=np.float64)
    if len(pts) < max(3, cfg.sample_size):
        raise RansacError(f"parabola RANSAC needs at least {max(3, cfg.sample_size)} points")
    return ransac_poly(pts[:, 1], pts[:, 0], 2, cfg)


def road_fn(beta, v):
    b0, b1, b2 = beta
    v = np.asarray(v, dtype=np.float64)
    return b0 + b1 * v + b2 * v * v


def vpy_profile(beta, rows) -> np.ndarray:
    """Per-row vertical vanishing-point coordinate v - f(v) / f'(v)."""
    b0, b1, b2 = (float(b) for b in beta)
    v = np.asarray(rows, dtype=np.float64)
    slope = b1 + 2.0 * b2 * v
    bad = np.abs(slope) < 1e-12
    if np.any(bad):
        raise SingularProfileError(f"road profile slope vanishes at rows {v[bad][:5].tolist()}")
    return v - (b0 + b1 * v + b2 * v * v) / slope


def horizon_row(beta, v_max: int) -> tuple[int, bool]:
    """Row where f(v) = 0 on its rising branch, clamped to [0, v_max].

    The flag is True when no rising root falls inside the image.
    """
    b0, b1, b2 = (float(b) for b in beta)
    roots = []
    if abs(b2) < 1e-15:
        if abs(b1) > 0:
            roots.append(-b0 / b1)
    else:
        disc = b1 * b1 - 4 * b2 * b0
        if disc >= 0:
            sq = math.sqrt(disc)
            roots += [(-b1 - sq) / (2 * b2), (-b1 + sq) / (2 * b2)]
    rising = [r for r in roots if b1 + 2 * b2 * r > 0]
    if not rising:
        return 0, True
    root = rising[0]
    row = int(round(root))
    flag = row < 0 or row > v_max
    return int(min(max(row, 0), v_max)), flag


@dataclass
class RoadProfile:
    beta: np.ndarray
    horizon_row: int
    v_max: int
    horizon_flag: bool = False
    ransac: RansacResult | None = None

    @property
    def rows(self) -> np.ndarray:
        return np.arange(self.horizon_row, self.v_max + 1)

    def f(self, v):
        return road_fn(self.beta, v)

    def vpy(self, rows=None):
        return vpy_profile(self.beta, self.rows if rows is None else rows)

    @classmethod
    def from_beta(cls, beta, v_max: int, ransac: RansacResult | None = None) -> "RoadProfile":
        beta = np.asarray(beta, dtype=np.float64)
        h, flag = horizon_row(beta, v_max)
        return cls(beta=beta, horizon_row=h, v_max=v_max, horizon_flag=flag, ransac=ransac)


def fit_road_profile(hist: np.ndarray, v_max: int, lambda_y: float = 30.0,
                     cfg: RansacConfig | None = None, paper_sign: bool = False):
    """DP path, drop unsupported stages, RANSAC parabola.  Returns (profile, path)."""
    path = dp_extract_vpath(hist, lambda_y, paper_sign=paper_sign)
    if path.empty:
        return None, path
    keep = path.support > 0
    res = ransac_beta(path.points[keep], cfg)
    return RoadProfile.from_beta(res.coef, v_max, ransac=res), path


__all__ = [
    "DpPath", "PolyFit", "RoadProfile", "build_vdisparity", "dp_extract_vpath",
    "fit_parabola_lsq", "fit_road_profile", "horizon_row", "ransac_beta", "road_fn",
    "vpy_profile",
]
