"""Dense horizontal vanishing-point estimation.

Column coordinates live on an extended axis that reaches ``xi * width``
beyond each image border; ``offset`` converts a column u to an array index
``u + offset``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RansacError
from .polyfit import PolyFit, RansacConfig, RansacResult, fit_poly, ransac_poly
from .preprocess import EdgeSet
from .road import DpPath

MAX_COL_STEP = 5


def extended_axis(width: int, xi: float = 0.5) -> tuple[int, int]:
    """(offset, n_cols) of the column range [-xi*width, (1+xi)*width)."""
    offset = int(np.floor(xi * width))
    n_cols = int(round((2 * xi + 1) * width))
    return offset, n_cols


@dataclass
class SparseVpxMap:
    u: np.ndarray
    v: np.ndarray
    vpx: np.ndarray  # integer column, extended frame
    offset: int
    n_cols: int
    skipped: int = 0


def sparse_vpx(edges: EdgeSet, vpy: np.ndarray, width: int, xi: float = 0.5,
               eps_g: float = 1e-3) -> SparseVpxMap:
    """One V_px vote per edge pixel from its gradient direction.

    ``vpy`` is indexed by absolute row.  The edge line through (u_e, v_e)
    is extended up to row V_py(v_e); the column it reaches is the vote.
    Edges with |gx| < eps_g and rows without V_py are skipped; votes that
    land outside the extended axis are clamped to its end columns.
    """
    offset, n_cols = extended_axis(width, xi)
    vpy = np.asarray(vpy, dtype=np.float64)
    u, v = edges.u, edges.v
    gx, gy = edges.gx, edges.gy
    ok = np.abs(gx) >= eps_g
    ok &= (v >= 0) & (v < len(vpy))
    vy = np.full(len(u), np.nan)
    vy[ok] = vpy[v[ok]]
    ok &= np.isfinite(vy)
    est = np.full(len(u), np.nan)
    est[ok] = u[ok] + (v[ok] - vy[ok]) * gy[ok] / gx[ok]
    col = np.zeros(len(u), dtype=np.int64)
    col[ok] = np.clip(np.rint(est[ok]), -offset, n_cols - offset - 1).astype(np.int64)
    return SparseVpxMap(u=u[ok], v=v[ok], vpx=col[ok], offset=offset, n_cols=n_cols,
                        skipped=int(len(u) - ok.sum()))


@dataclass
class DenseVpxAccumulator:
    """Vote grid ``grid[v, u + offset]``; rows outside [horizon, v_max] are zero."""

    grid: np.ndarray
    horizon: int
    v_max: int
    chi: int
    rho_vote: float
    offset: int

    @property
    def n_cols(self) -> int:
        return self.grid.shape[1]


def band_rows(v: int, chi: int, horizon: int, v_max: int) -> tuple[int, int]:
    """Rows [top, bottom] voting into accumulator row v."""
    return max(horizon, v - chi), min(v_max, v + chi)


def _row_counts(sparse: SparseVpxMap, v_max: int) -> np.ndarray:
    counts = np.zeros((v_max + 1, sparse.n_cols), dtype=np.int64)
    sel = (sparse.v >= 0) & (sparse.v <= v_max)
    np.add.at(counts, (sparse.v[sel], sparse.vpx[sel] + sparse.offset), 1)
    return counts


def accumulate_dense_vpx(sparse: SparseVpxMap, chi: int = 25, rho_vote: float = 1.0,
                         horizon: int = 0, v_max: int | None = None) -> DenseVpxAccumulator:
    """Sliding-band vote accumulation from the bottom row upwards.

    The band of row v spans rows [v - chi, v + chi] clipped to
    [horizon, v_max]: it grows while its lower edge is pinned at v_max,
    slides at full height 2*chi + 1, then thins once its upper edge is
    pinned at the horizon.  Each step adds the new top row and drops the
    row that left the bottom.
    """
    if v_max is None:
        v_max = int(sparse.v.max()) if len(sparse.v) else horizon
    counts = _row_counts(sparse, v_max)
    grid = np.zeros((v_max + 1, sparse.n_cols), dtype=np.float64)
    band = np.zeros(sparse.n_cols, dtype=np.int64)
    top, bottom = band_rows(v_max, chi, horizon, v_max)
    for r in range(top, bottom + 1):
        band += counts[r]
    grid[v_max] = -rho_vote * band
    for v in range(v_max - 1, horizon - 1, -1):
        if v - chi >= horizon:
            band += counts[v - chi]
        if v + chi + 1 <= v_max:
            band -= counts[v + chi + 1]
        grid[v] = -rho_vote * band
    return DenseVpxAccumulator(grid=grid, horizon=horizon, v_max=v_max, chi=chi,
                               rho_vote=rho_vote, offset=sparse.offset)


def _tau_order(max_step):
    order = [0]
    for k in range(1, max_step + 1):
        order += [-k, k]
    return order


def dp_extract_upath(acc: DenseVpxAccumulator, lambda_x: float = 10.0, paper_sign: bool = False,
                     max_step: int = MAX_COL_STEP) -> DpPath:
    """Minimal-energy column path from the bottom row to the horizon.

    Ties prefer the smallest |tau|, then the leftward step; the terminal
    cell ties go to the leftmost column.  Points are returned as (u, v)
    with u in image columns, ordered by increasing row.
    """
    m = acc.grid
    h0, h1 = acc.horizon, acc.v_max
    n = m.shape[1]
    nrows = h1 - h0 + 1
    energy = np.empty((nrows, n))
    back = np.zeros((nrows, n), dtype=np.int64)
    energy[nrows - 1] = m[h1]
    cols = np.arange(n)
    for k in range(nrows - 2, -1, -1):
        v = h0 + k
        nxt = energy[k + 1]
        best = np.full(n, np.inf)
        arg = np.zeros(n, dtype=np.int64)
        for tau in _tau_order(max_step):
            pen = lambda_x * tau if paper_sign else lambda_x * abs(tau)
            cand = np.full(n, np.inf)
            if abs(tau) >= n:
                pass
            elif tau >= 0:
                cand[:n - tau] = nxt[tau:] + pen
            else:
                cand[-tau:] = nxt[:n + tau] + pen
            better = cand < best
            best[better] = cand[better]
            arg[better] = tau
        energy[k] = m[v] + best
        back[k] = cols + arg
    c = int(np.argmin(energy[0]))
    total = float(energy[0, c])
    path_cols = [c]
    for k in range(0, nrows - 1):
        c = int(back[k, c])
        path_cols.append(c)
    path_cols = np.array(path_cols, dtype=np.int64)
    rows = np.arange(h0, h1 + 1)
    pts = np.stack([path_cols - acc.offset, rows], axis=1)
    support = -m[rows, path_cols]
    return DpPath(points=pts, energy=total, backtrace=back, support=support,
                  empty=not np.any(m[h0:h1 + 1]))


class QuarticProfile(PolyFit):
    """Quartic u = g(v) for the dense horizontal vanishing point."""

    @property
    def gamma(self) -> np.ndarray:
        return self.coef

    @property
    def v_normalizer(self) -> float:
        return self.scale


def _as_quartic(fit: PolyFit) -> QuarticProfile:
    return QuarticProfile(normalized=fit.normalized, scale=fit.scale, kappa=fit.kappa,
                          max_intermediate=fit.max_intermediate)


def fit_quartic(points, kappa: float = 1.0, v_normalizer: float | None = None) -> QuarticProfile:
    """Least-squares quartic through (u, v) points; kappa cancels out."""
    pts = np.asarray(points, dtype=np.float64)
    return _as_quartic(fit_poly(pts[:, 1], pts[:, 0], 4, kappa=kappa, scale=v_normalizer))


def ransac_gamma(points, cfg: RansacConfig | None = None, kappa: float = 1.0) -> RansacResult:
    if cfg is None:
        cfg = RansacConfig(tolerance=16.0, inlier_fraction=0.99, sample_size=5)
    pts = np.asarray(points.points if isinstance(points, DpPath) else points, dtype=np.float64)
    if len(pts) < max(5, cfg.sample_size):
        raise RansacError(f"quartic RANSAC needs at least {max(5, cfg.sample_size)} points")
    res = ransac_poly(pts[:, 1], pts[:, 0], 4, cfg, kappa=kappa)
    res.fit = _as_quartic(res.fit)
    return res


def vpx_profile(gamma, rows) -> np.ndarray:
    """Evaluate the quartic at each row (raw coefficients or a fitted profile)."""
    if isinstance(gamma, PolyFit):
        return gamma(rows)
    v = np.asarray(rows, dtype=np.float64)
    out = np.zeros_like(v)
    for c in np.asarray(gamma, dtype=np.float64)[::-1]:
        out = out * v + c
    return out


@dataclass
class VanishingField:
    """Per-row vanishing point; NaN outside [horizon, v_max]."""

    vpx: np.ndarray
    vpy: np.ndarray
    horizon: int
    v_max: int

    @classmethod
    def constant(cls, vpx: float, vpy: float, horizon: int, v_max: int) -> "VanishingField":
        a = np.full(v_max + 1, np.nan)
        b = np.full(v_max + 1, np.nan)
        a[horizon:] = vpx
        b[horizon:] = vpy
        return cls(vpx=a, vpy=b, horizon=horizon, v_max=v_max)

    @classmethod
    def from_profiles(cls, vpx_rows, vpy_rows, horizon: int, v_max: int) -> "VanishingField":
        a = np.full(v_max + 1, np.nan)
        b = np.full(v_max + 1, np.nan)
        a[horizon:] = vpx_rows
        b[horizon:] = vpy_rows
        return cls(vpx=a, vpy=b, horizon=horizon, v_max=v_max)
