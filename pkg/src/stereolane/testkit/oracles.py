"""Brute-force reference implementations for tests.

Nothing here imports the code it checks.  Each oracle states its cost so
callers can keep instances desk-sized.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.ndimage import correlate

MAX_PATHS = 10 ** 6


def oracle_integral(img) -> np.ndarray:
    """Double-loop prefix sums.  O(h^2 w^2)."""
    a = np.asarray(img)
    h, w = a.shape
    out = np.zeros(a.shape, dtype=np.float64 if a.dtype.kind == "f" else np.int64)
    for v in range(h):
        for u in range(w):
            out[v, u] = a[:v + 1, :u + 1].sum()
    return out


def oracle_block_sum(img, u: int, v: int, rho: int):
    """Direct sum over the block.  O(rho^2)."""
    a = np.asarray(img)
    s = 0
    for j in range(v - rho, v + rho + 1):
        for i in range(u - rho, u + rho + 1):
            s += a[j, i]
    return s


def oracle_block_stats(img, u: int, v: int, rho: int) -> tuple[float, float]:
    """Mean and population standard deviation of one block."""
    b = np.asarray(img, dtype=np.float64)[v - rho:v + rho + 1, u - rho:u + rho + 1]
    n = b.size
    mu = sum(float(x) for x in b.ravel()) / n
    var = sum((float(x) - mu) ** 2 for x in b.ravel()) / n
    return mu, math.sqrt(var)


def oracle_ncc_direct(block_l, block_r) -> float:
    """Deviation-product normalised cross-correlation of two equal blocks."""
    a = np.asarray(block_l, dtype=np.float64).ravel()
    b = np.asarray(block_r, dtype=np.float64).ravel()
    n = a.size
    ma, mb = a.mean(), b.mean()
    sa = math.sqrt(((a - ma) ** 2).sum() / n)
    sb = math.sqrt(((b - mb) ** 2).sum() / n)
    return float(((a - ma) * (b - mb)).sum() / (n * sa * sb))


def oracle_disparity_full(left, right, rho: int, d_min: int, d_max: int,
                          sigma_floor: float = 1e-4, tie_eps: float = 1e-12) -> np.ndarray:
    """Full-range winner-take-all NCC on a cost volume built with box filters.

    Candidates are scanned in ascending d and only replace the incumbent when
    better by more than ``tie_eps``.  O(h w (d_max - d_min) rho^2) via scipy.
    """
    L = np.asarray(left, dtype=np.float64)
    R = np.asarray(right, dtype=np.float64)
    h, w = L.shape
    n = (2 * rho + 1) ** 2
    k = np.ones((2 * rho + 1, 2 * rho + 1))

    def box(x):
        return correlate(x, k, mode="constant")

    mu_l = box(L) / n
    sd_l = np.sqrt(np.maximum(box(L * L) / n - mu_l ** 2, 0))
    mu_r = box(R) / n
    sd_r = np.sqrt(np.maximum(box(R * R) / n - mu_r ** 2, 0))
    inner = np.zeros((h, w), dtype=bool)
    inner[rho:h - rho, rho:w - rho] = True
    best = np.full((h, w), -np.inf)
    best_d = np.full((h, w), -1, dtype=np.int64)
    cols = np.arange(w)
    for d in range(d_min, d_max + 1):
        shifted = np.zeros_like(R)
        if d < w:
            shifted[:, d:] = R[:, :w - d]
        s = box(L * shifted)
        mr = np.zeros_like(mu_r)
        sr = np.zeros_like(sd_r)
        if d < w:
            mr[:, d:] = mu_r[:, :w - d]
            sr[:, d:] = sd_r[:, :w - d]
        valid = inner & ((cols - d) >= rho)[None, :] & (sd_l >= sigma_floor) & (sr >= sigma_floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = (s - n * mu_l * mr) / (n * sd_l * sr)
        upd = valid & (c > best + tie_eps)
        best[upd] = c[upd]
        best_d[upd] = d
    best_d[best_d < 0] = 0
    return best_d


def oracle_bilateral(img, sigma_s: float, sigma_r: float, rho: int) -> np.ndarray:
    """Pixel-by-pixel weighted mean with reflect-101 borders.  O(h w rho^2)."""
    a = np.asarray(img, dtype=np.float64)
    h, w = a.shape

    def mirror(i, n):
        if n == 1:
            return 0
        period = 2 * (n - 1)
        i = i % period
        return i if i < n else period - i

    out = np.empty_like(a)
    for v in range(h):
        for u in range(w):
            c = a[v, u]
            num = den = 0.0
            for j in range(v - rho, v + rho + 1):
                for i in range(u - rho, u + rho + 1):
                    x = a[mirror(j, h), mirror(i, w)]
                    wt = math.exp(-((i - u) ** 2 + (j - v) ** 2) / sigma_s ** 2) * math.exp(-(x - c) ** 2 / sigma_r ** 2)
                    num += wt * x
                    den += wt
            out[v, u] = num / den
    return out


def oracle_band_sum(votes, chi: int, horizon: int, v_max: int, n_cols: int, rho_vote: float = 1.0) -> np.ndarray:
    """Recount every accumulator row from scratch.

    ``votes`` is an iterable of (row, column_index).  O(rows * votes).
    """
    votes = list(votes)
    grid = np.zeros((v_max + 1, n_cols))
    for v in range(horizon, v_max + 1):
        top, bottom = max(horizon, v - chi), min(v_max, v + chi)
        for r, c in votes:
            if top <= r <= bottom:
                grid[v, c] -= rho_vote
    return grid


def _check_budget(n):
    if n > MAX_PATHS:
        raise ValueError(f"{n} paths exceeds the enumeration budget of {MAX_PATHS}")


def oracle_dp_enumerate_v(hist, lam: float, paper_sign: bool = False, max_step: int = 6):
    """Every path over the disparity stages of a v-disparity histogram.

    Returns (energy, rows) with rows[d] the row at stage d.  Among equal
    energies the lexicographically smallest (row at d = 0, step 0->1, ...)
    wins.
    """
    m = np.asarray(hist)
    h, nb = m.shape
    _check_budget(h * (max_step + 1) ** (nb - 1))
    best = None
    for v0 in range(h):
        for steps in itertools.product(range(max_step + 1), repeat=nb - 1):
            rows = [v0]
            ok = True
            for t in steps:
                rows.append(rows[-1] + t)
                if rows[-1] >= h:
                    ok = False
                    break
            if not ok:
                continue
            e = 0
            for d, v in enumerate(rows):
                e -= m[v, d]
            for t in steps:
                e += -lam * t if paper_sign else lam * t
            if best is None or e < best[0]:
                best = (e, rows)
    return best


def oracle_dp_enumerate_u(grid, lam: float, paper_sign: bool = False, max_step: int = 5):
    """Every column path from the last row (bottom) to row 0 of ``grid``.

    Returns (energy, cols) with cols[k] the column at row k.  Ties follow
    the order: leftmost terminal column, then per step |tau| ascending with
    the leftward step first.
    """
    m = np.asarray(grid)
    nr, n = m.shape
    _check_budget(n * (2 * max_step + 1) ** (nr - 1))
    order = [0]
    for k in range(1, max_step + 1):
        order += [-k, k]
    best = None
    for c0 in range(n):
        for steps in itertools.product(order, repeat=nr - 1):
            cols = [c0]
            ok = True
            for t in steps:
                cols.append(cols[-1] + t)
                if not 0 <= cols[-1] < n:
                    ok = False
                    break
            if not ok:
                continue
            e = 0
            for k, c in enumerate(cols):
                e += m[k, c]
            for t in steps:
                e += lam * t if paper_sign else lam * abs(t)
            if best is None or e < best[0]:
                best = (e, cols)
    return best


def oracle_m0(gx, weights, nu: int, varsigma: int) -> np.ndarray:
    """Four nested loops over pixels and box offsets, zero outside."""
    gx = np.asarray(gx, dtype=np.float64)
    wt = np.asarray(weights, dtype=np.float64)
    h, w = gx.shape
    out = np.zeros((h, w))
    for j in range(h):
        for i in range(w):
            s = 0.0
            for y in range(-varsigma, varsigma + 1):
                for x in range(-nu, nu + 1):
                    jj, ii = j + y, i + x
                    if 0 <= jj < h and 0 <= ii < w:
                        s += gx[jj, ii] * wt[jj, ii]
            out[j, i] = s
    return out


def oracle_line_point(p0, p1, v):
    """Column at row v on the line through p0 = (u, v) and p1 = (u, v)."""
    (u0, v0), (u1, v1) = p0, p1
    return u0 + (u1 - u0) * (v - v0) / (v1 - v0)
