"""Polynomial least squares on a normalised abscissa, and the RANSAC loop.

Both the road parabola d = f(v) and the vanishing-point quartic
u = g(v) are fitted here.  The abscissa is divided by ``scale`` before the
Vandermonde matrix is built so that high powers of v stay near 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficientError, RansacError


@dataclass
class PolyFit:
    """Polynomial fitted as c_k * (v / scale)**k.

    ``coef`` holds the same polynomial expressed in raw v units.
    """

    normalized: np.ndarray
    scale: float
    kappa: float = 1.0
    max_intermediate: float = 0.0

    @property
    def degree(self) -> int:
        return len(self.normalized) - 1

    @property
    def coef(self) -> np.ndarray:
        k = np.arange(len(self.normalized))
        return self.normalized / self.scale ** k

    def __call__(self, v):
        s = np.asarray(v, dtype=np.float64) / self.scale
        out = np.zeros_like(s)
        for c in self.normalized[::-1]:
            out = out * s + c
        return out

    def derivative(self, v):
        s = np.asarray(v, dtype=np.float64) / self.scale
        out = np.zeros_like(s)
        n = len(self.normalized)
        for k in range(n - 1, 0, -1):
            out = out * s + k * self.normalized[k]
        return out / self.scale


def vandermonde(v, degree: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v[:, None] ** np.arange(degree + 1)[None, :]


def fit_poly(v, y, degree: int, kappa: float = 1.0, scale: float | None = None) -> PolyFit:
    """Solve (kappa P^T P) c = (kappa P^T) y on the normalised abscissa.

    kappa multiplies both sides and cancels; the unscaled system is solved
    so the coefficients do not depend on kappa even in rounding.  Reported
    intermediate magnitudes include the kappa factor.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if v.shape != y.shape:
        raise ValueError("v and y must have the same length")
    if len(np.unique(v)) < degree + 1:
        raise RankDeficientError(
            f"degree-{degree} fit needs {degree + 1} distinct abscissae, got {len(np.unique(v))}")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if scale is None:
        scale = float(np.max(np.abs(v)))
        if scale == 0.0:
            scale = 1.0
    p = vandermonde(v / scale, degree)
    a = p.T @ p
    b = p.T @ y
    if np.linalg.cond(a) > 1e14:
        raise RankDeficientError("normal matrix is numerically singular")
    c = np.linalg.solve(a, b)
    peak = max(float(np.max(np.abs(p))), kappa * float(np.max(np.abs(a))), kappa * float(np.max(np.abs(b))))
    return PolyFit(normalized=c, scale=scale, kappa=kappa, max_intermediate=peak)


@dataclass(frozen=True)
class RansacConfig:
    tolerance: float = 4.0
    inlier_fraction: float = 0.99
    sample_size: int = 3
    max_iterations: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.inlier_fraction <= 1:
            raise ValueError("inlier_fraction must lie in (0, 1]")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class RansacResult:
    fit: PolyFit
    inliers: np.ndarray  # bool mask over the input points
    iterations: int
    inlier_fraction: float
    converged: bool
    candidate_sizes: list[int] = field(default_factory=list)

    @property
    def coef(self) -> np.ndarray:
        return self.fit.coef


def _sq_residuals(fit: PolyFit, v, y):
    r = y - fit(v)
    return r * r


def _classify(fit: PolyFit, v, y, tol):
    return _sq_residuals(fit, v, y) < tol


def ransac_poly(v, y, degree: int, cfg: RansacConfig, kappa: float = 1.0) -> RansacResult:
    """Sample / fit / classify / discard until the inlier share reaches epsilon.

    Each minimal-sample hypothesis is refit once on its own inliers before
    scoring.  Outliers are discarded relative to the best hypothesis so far,
    so one lucky-but-wrong sample cannot throw away good points for good.
    The returned mask is exactly {r_j < tolerance} for the final fit.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    n_params = degree + 1
    if cfg.sample_size < n_params:
        raise ValueError(f"sample_size must be >= {n_params} for degree {degree}")
    if len(v) < cfg.sample_size or len(np.unique(v)) < n_params:
        raise RansacError(f"need at least {cfg.sample_size} points with {n_params} distinct rows")
    scale = float(np.max(np.abs(v))) or 1.0
    rng = np.random.default_rng(cfg.rng_seed)
    n = len(v)

    best_fit = None
    best_mask = None
    sizes = [n]
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        idx = rng.choice(n, size=cfg.sample_size, replace=False)
        try:
            hyp = fit_poly(v[idx], y[idx], degree, kappa=kappa, scale=scale)
        except RankDeficientError:
            sizes.append(sizes[-1])
            continue
        inl = _classify(hyp, v, y, cfg.tolerance)
        if inl.sum() >= n_params and len(np.unique(v[inl])) >= n_params:
            try:
                ref = fit_poly(v[inl], y[inl], degree, kappa=kappa, scale=scale)
                ref_inl = _classify(ref, v, y, cfg.tolerance)
                if ref_inl.sum() >= inl.sum():
                    hyp, inl = ref, ref_inl
            except RankDeficientError:
                pass
        if best_mask is None or inl.sum() > best_mask.sum():
            best_fit, best_mask = hyp, inl
        sizes.append(int(best_mask.sum()))
        if best_mask.mean() >= cfg.inlier_fraction:
            converged = True
            break

    if best_mask is None:
        raise RankDeficientError("every sample was degenerate")
    mask = best_mask
    fit = best_fit
    for _ in range(20):
        if mask.sum() < n_params or len(np.unique(v[mask])) < n_params:
            break
        fit = fit_poly(v[mask], y[mask], degree, kappa=kappa, scale=scale)
        new = _classify(fit, v, y, cfg.tolerance)
        if np.array_equal(new, mask) or len(np.unique(v[new])) < n_params:
            break
        mask = new
    mask = _classify(fit, v, y, cfg.tolerance)
    return RansacResult(fit=fit, inliers=mask, iterations=it,
                        inlier_fraction=float(mask.mean()), converged=converged,
                        candidate_sizes=sizes)
