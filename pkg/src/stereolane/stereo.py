"""Memoised NCC block matching with search-range propagation and LRC.

Images are 2D float arrays indexed ``img[v, u]`` (row, column) holding
intensities in [0, 1].  Row ``v_max = height - 1`` is the bottom of the
image, which is where the disparity sweep starts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

# Costs closer than this are treated as tied; the smaller disparity wins.
TIE_EPS = 1e-12
INVALID = 0


def as_gray(img) -> np.ndarray:
    """Return ``img`` as a float64 intensity grid in [0, 1].

    8-bit inputs are divided by 255, 16-bit by 65535.  Float inputs must
    already be normalised.
    """
    a = np.asarray(img)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"expected a non-empty 2D image, got shape {a.shape}")
    if a.dtype == np.uint8:
        return a.astype(np.float64) / 255.0
    if a.dtype == np.uint16:
        return a.astype(np.float64) / 65535.0
    if a.dtype == np.bool_:
        return a.astype(np.float64)
    a = a.astype(np.float64)
    if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
        raise ValueError("float images must hold finite values in [0, 1]")
    return a


@dataclass(frozen=True)
class StereoConfig:
    rho: int = 3
    d_min: int = 0
    d_max: int = 64
    tau: int = 1
    tr_lrc: int = 3
    sigma_floor: float = 1e-4

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.d_min < 0:
            raise ValueError("d_min must be >= 0")
        if self.d_max <= self.d_min:
            raise ValueError("d_max must exceed d_min")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.tr_lrc < 0:
            raise ValueError("tr_lrc must be >= 0")
        if not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be > 0")


@dataclass
class BlockStats:
    """Per-pixel block mean and standard deviation.

    Pixels whose block leaves the image carry ``mu = sigma = 0`` so they
    always fail the texture guard.
    """

    mu: np.ndarray
    sigma: np.ndarray
    rho: int

    @property
    def n(self) -> int:
        return (2 * self.rho + 1) ** 2


# ---------------------------------------------------------------- integral image


@njit(cache=True, nogil=True)
def _integral_recurrence(img, out):
    h, w = img.shape
    out[0, 0] = img[0, 0]
    for u in range(1, w):
        out[0, u] = out[0, u - 1] + img[0, u]
    for v in range(1, h):
        out[v, 0] = out[v - 1, 0] + img[v, 0]
    for u in range(1, w):
        for v in range(1, h):
            out[v, u] = out[v - 1, u] + out[v, u - 1] - out[v - 1, u - 1] + img[v, u]
    return out


def build_integral(img) -> np.ndarray:
    """Summed-area table, one pass over the image.

    Integer images are summed in int64 (exact); everything else in float64.
    """
    a = np.asarray(img)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("build_integral needs a non-empty 2D image")
    if np.issubdtype(a.dtype, np.integer) or a.dtype == np.bool_:
        a = a.astype(np.int64)
        out = np.empty(a.shape, dtype=np.int64)
    else:
        a = a.astype(np.float64)
        out = np.empty(a.shape, dtype=np.float64)
    return _integral_recurrence(np.ascontiguousarray(a), out)


def block_sum(integ: np.ndarray, u: int, v: int, rho: int):
    """Sum of the (2*rho+1)-square block centred at column u, row v."""
    h, w = integ.shape
    if rho < 0 or u - rho < 0 or v - rho < 0 or u + rho >= w or v + rho >= h:
        raise IndexError(f"block of half-size {rho} at (u={u}, v={v}) leaves the {w}x{h} image")

    def at(uu, vv):
        if uu < 0 or vv < 0:
            return 0
        return integ[vv, uu]

    r1 = at(u + rho, v + rho)
    r2 = at(u - rho - 1, v - rho - 1)
    r3 = at(u - rho - 1, v + rho)
    r4 = at(u + rho, v - rho - 1)
    return r1 + r2 - r3 - r4


def _box_sums(integ: np.ndarray, rho: int) -> np.ndarray:
    # Vectorised four-reference lookup for every interior centre; border = 0.
    h, w = integ.shape
    out = np.zeros((h, w), dtype=integ.dtype)
    k = 2 * rho + 1
    if h < k or w < k:
        return out
    p = np.zeros((h + 1, w + 1), dtype=integ.dtype)
    p[1:, 1:] = integ
    out[rho:h - rho, rho:w - rho] = p[k:, k:] - p[:h + 1 - k, k:] - p[k:, :w + 1 - k] + p[:h + 1 - k, :w + 1 - k]
    return out


def precompute_stats(img, rho: int) -> BlockStats:
    """Block means and standard deviations from two integral images."""
    a = as_gray(img)
    h, w = a.shape
    if h <= 2 * rho or w <= 2 * rho:
        raise ValueError(f"image {w}x{h} is not larger than a {2 * rho + 1}-pixel block")
    n = (2 * rho + 1) ** 2
    i1, i2 = build_integral(a), build_integral(a * a)
    s1 = _box_sums(i1, rho)
    s2 = _box_sums(i2, rho)
    mu = s1 / n
    var = s2 / n - mu * mu
    # Radicands within the rounding of the four-corner sums are zero variance, not texture.
    eps = np.finfo(np.float64).eps
    var[var < 4 * eps * (np.abs(i2).max() + 2 * np.abs(mu) * np.abs(i1).max()) / n] = 0.0
    sigma = np.sqrt(var)
    interior = np.zeros((h, w), dtype=bool)
    interior[rho:h - rho, rho:w - rho] = True
    mu[~interior] = 0.0
    sigma[~interior] = 0.0
    return BlockStats(mu=mu, sigma=sigma, rho=rho)


def ncc_cost(left, right, stats_l: BlockStats, stats_r: BlockStats, u: int, v: int, d: int,
             sigma_floor: float = 1e-4):
    """Factorised NCC between left block at (u, v) and right block at (u - d, v).

    Returns None when either block is too flat to normalise.
    """
    rho = stats_l.rho
    h, w = left.shape
    ur = u - d
    for uu in (u, ur):
        if uu - rho < 0 or uu + rho >= w or v - rho < 0 or v + rho >= h:
            raise IndexError(f"block at (u={uu}, v={v}) leaves the image")
    sl = stats_l.sigma[v, u]
    sr = stats_r.sigma[v, ur]
    if sl < sigma_floor or sr < sigma_floor:
        return None
    bl = left[v - rho:v + rho + 1, u - rho:u + rho + 1]
    br = right[v - rho:v + rho + 1, ur - rho:ur + rho + 1]
    n = stats_l.n
    dot = float(np.sum(bl * br))
    return (dot - n * stats_l.mu[v, u] * stats_r.mu[v, ur]) / (n * sl * sr)


# ---------------------------------------------------------------- matching kernels


@njit(cache=True, nogil=True)
def _candidate_mask(prev, u, w, d_min, d_max, tau, mask):
    # Marks SR for pixel u from the three disparities in the row below.
    any_set = False
    for k in range(u - 1, u + 2):
        if k < 0 or k >= w:
            continue
        l = prev[k]
        if l < 0:
            continue
        lo = max(d_min, l - tau)
        hi = min(d_max, l + tau)
        for d in range(lo, hi + 1):
            mask[d - d_min] = True
            any_set = True
    if not any_set:
        for d in range(d_min, d_max + 1):
            mask[d - d_min] = True


@njit(cache=True, nogil=True)
def _match_memo(ref, tgt, mu_r, sd_r, mu_t, sd_t, rho, d_min, d_max, tau, floor, direction, full):
    h, w = ref.shape
    out = np.full((h, w), -1, np.int64)
    n = (2 * rho + 1) ** 2
    nd = d_max - d_min + 1
    mask = np.zeros(nd, np.bool_)
    for v in range(h - 1 - rho, rho - 1, -1):
        below = out[v + 1] if v + 1 < h else out[v]
        for u in range(rho, w - rho):
            if sd_r[v, u] < floor:
                continue
            if full or v + 1 >= h:
                mask[:] = True
            else:
                mask[:] = False
                _candidate_mask(below, u, w, d_min, d_max, tau, mask)
            best = -np.inf
            best_d = -1
            for i in range(nd):
                if not mask[i]:
                    continue
                d = d_min + i
                uc = u - direction * d
                if uc < rho or uc > w - 1 - rho:
                    continue
                st = sd_t[v, uc]
                if st < floor:
                    continue
                s = 0.0
                for j in range(-rho, rho + 1):
                    for k in range(-rho, rho + 1):
                        s += ref[v + j, u + k] * tgt[v + j, uc + k]
                c = (s - n * mu_r[v, u] * mu_t[v, uc]) / (n * sd_r[v, u] * st)
                if c > best + TIE_EPS:
                    best = c
                    best_d = d
            out[v, u] = best_d
    return out


@njit(cache=True, nogil=True)
def _block_mean_std(img, v, u, rho, n):
    s = 0.0
    for j in range(-rho, rho + 1):
        for k in range(-rho, rho + 1):
            s += img[v + j, u + k]
    mu = s / n
    q = 0.0
    for j in range(-rho, rho + 1):
        for k in range(-rho, rho + 1):
            t = img[v + j, u + k] - mu
            q += t * t
    return mu, np.sqrt(q / n)


@njit(cache=True, nogil=True)
def _match_naive(ref, tgt, rho, d_min, d_max, tau, floor, direction, full):
    # Same search as _match_memo but every candidate recomputes mu and sigma
    # of both blocks and evaluates the deviation-product form of NCC.
    h, w = ref.shape
    out = np.full((h, w), -1, np.int64)
    n = (2 * rho + 1) ** 2
    nd = d_max - d_min + 1
    mask = np.zeros(nd, np.bool_)
    for v in range(h - 1 - rho, rho - 1, -1):
        below = out[v + 1] if v + 1 < h else out[v]
        for u in range(rho, w - rho):
            if full or v + 1 >= h:
                mask[:] = True
            else:
                mask[:] = False
                _candidate_mask(below, u, w, d_min, d_max, tau, mask)
            best = -np.inf
            best_d = -1
            textured = True
            for i in range(nd):
                if not mask[i]:
                    continue
                d = d_min + i
                uc = u - direction * d
                if uc < rho or uc > w - 1 - rho:
                    continue
                mu_a, sd_a = _block_mean_std(ref, v, u, rho, n)
                if sd_a < floor:
                    textured = False
                    break
                mu_b, sd_b = _block_mean_std(tgt, v, uc, rho, n)
                if sd_b < floor:
                    continue
                s = 0.0
                for j in range(-rho, rho + 1):
                    for k in range(-rho, rho + 1):
                        s += (ref[v + j, u + k] - mu_a) * (tgt[v + j, uc + k] - mu_b)
                c = s / (n * sd_a * sd_b)
                if c > best + TIE_EPS:
                    best = c
                    best_d = d
            if textured:
                out[v, u] = best_d
    return out


def _check_pair(left, right, cfg: StereoConfig):
    left = as_gray(left)
    right = as_gray(right)
    if left.shape != right.shape:
        raise ValueError(f"stereo pair shapes differ: {left.shape} vs {right.shape}")
    h, w = left.shape
    if h <= 2 * cfg.rho or w <= 2 * cfg.rho:
        raise ValueError(f"image {w}x{h} is smaller than a {2 * cfg.rho + 1}-pixel block")
    return np.ascontiguousarray(left), np.ascontiguousarray(right)


def _finalise(raw: np.ndarray) -> np.ndarray:
    out = raw.copy()
    out[out < 0] = INVALID
    return out


def estimate_disparity_srp(left, right, cfg: StereoConfig = StereoConfig(), *,
                           stats_l: BlockStats | None = None, stats_r: BlockStats | None = None,
                           reference: str = "left", full_search: bool = False) -> np.ndarray:
    """Row-by-row disparity sweep from the bottom row upwards.

    With ``reference="right"`` the right image is matched against the left
    (candidate column ``u + d``), reusing the same memoised statistics.
    ``full_search`` disables propagation and scans [d_min, d_max] everywhere.
    Returns an int64 map with 0 marking unmatched pixels.
    """
    left, right = _check_pair(left, right, cfg)
    if stats_l is None:
        stats_l = precompute_stats(left, cfg.rho)
    if stats_r is None:
        stats_r = precompute_stats(right, cfg.rho)
    if reference == "left":
        args = (left, right, stats_l.mu, stats_l.sigma, stats_r.mu, stats_r.sigma, 1)
    elif reference == "right":
        args = (right, left, stats_r.mu, stats_r.sigma, stats_l.mu, stats_l.sigma, -1)
    else:
        raise ValueError("reference must be 'left' or 'right'")
    ref, tgt, mu_a, sd_a, mu_b, sd_b, direction = args
    raw = _match_memo(ref, tgt, mu_a, sd_a, mu_b, sd_b, cfg.rho, cfg.d_min, cfg.d_max,
                      cfg.tau, cfg.sigma_floor, direction, full_search)
    return _finalise(raw)


def estimate_disparity_naive(left, right, cfg: StereoConfig = StereoConfig(), *,
                             reference: str = "left", full_search: bool = True) -> np.ndarray:
    """Reference matcher that recomputes block statistics for every candidate."""
    left, right = _check_pair(left, right, cfg)
    if reference == "left":
        ref, tgt, direction = left, right, 1
    elif reference == "right":
        ref, tgt, direction = right, left, -1
    else:
        raise ValueError("reference must be 'left' or 'right'")
    raw = _match_naive(ref, tgt, cfg.rho, cfg.d_min, cfg.d_max, cfg.tau, cfg.sigma_floor,
                       direction, full_search)
    return _finalise(raw)


def propagated_range(neighbours, tau: int, d_min: int, d_max: int) -> set[int]:
    """Search range for one pixel given the three disparities below it.

    Negative entries mark unmatched neighbours and contribute nothing; if
    none are usable the full range is returned.
    """
    sr: set[int] = set()
    for l in neighbours:
        if l < 0:
            continue
        sr.update(range(max(d_min, l - tau), min(d_max, l + tau) + 1))
    return sr or set(range(d_min, d_max + 1))


def lrc_check(lf: np.ndarray, rt: np.ndarray, tr_lrc: int = 3) -> np.ndarray:
    """Zero every left disparity whose right-view counterpart disagrees."""
    lf = np.asarray(lf)
    rt = np.asarray(rt)
    if lf.shape != rt.shape:
        raise ValueError("disparity maps must have equal shapes")
    h, w = lf.shape
    cols = np.arange(w)[None, :] - lf
    inside = (cols >= 0) & (cols < w)
    rows = np.broadcast_to(np.arange(h)[:, None], lf.shape)
    partner = np.zeros_like(lf)
    partner[inside] = rt[rows[inside], cols[inside]]
    keep = inside & (np.abs(lf - partner) <= tr_lrc)
    return np.where(keep, lf, INVALID).astype(lf.dtype)


@dataclass
class DisparityResult:
    left: np.ndarray
    right: np.ndarray
    disparity: np.ndarray
    stats_l: BlockStats
    stats_r: BlockStats


def compute_disparity(left, right, cfg: StereoConfig = StereoConfig(), threads: int = 1) -> DisparityResult:
    """Left and right SRP maps followed by the LRC check.

    With ``threads > 1`` the two sweeps run concurrently; each is itself
    deterministic so the result does not depend on the thread count.
    """
    left, right = _check_pair(left, right, cfg)
    stats_l = precompute_stats(left, cfg.rho)
    stats_r = precompute_stats(right, cfg.rho)
    kw = dict(stats_l=stats_l, stats_r=stats_r)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fl = pool.submit(estimate_disparity_srp, left, right, cfg, reference="left", **kw)
            fr = pool.submit(estimate_disparity_srp, left, right, cfg, reference="right", **kw)
            lf, rt = fl.result(), fr.result()
    else:
        lf = estimate_disparity_srp(left, right, cfg, reference="left", **kw)
        rt = estimate_disparity_srp(left, right, cfg, reference="right", **kw)
    return DisparityResult(left=lf, right=rt, disparity=lrc_check(lf, rt, cfg.tr_lrc),
                           stats_l=stats_l, stats_r=stats_r)
