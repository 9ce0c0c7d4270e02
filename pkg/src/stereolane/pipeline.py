"""End-to-end lane detection: configuration, stages, report, benchmark."""

from __future__ import annotations

import dataclasses
import json
import logging
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import io
from .errors import RankDeficientError, RansacError, RoadProfileError, SingularProfileError, VanishingPointError
from .lanes import (LaneSet, aggregate_energy, build_m0, build_m1, default_tr_lpv, select_lanes)
from .polyfit import RansacConfig
from .preprocess import bilateral_filter, edge_map, road_mask, sobel_gradients
from .road import RoadProfile, build_vdisparity, dp_extract_vpath, ransac_beta, road_fn
from .stereo import (StereoConfig, as_gray, estimate_disparity_naive, estimate_disparity_srp,
                     lrc_check, precompute_stats)
from .vanish import (VanishingField, accumulate_dense_vpx, dp_extract_upath, ransac_gamma,
                     sparse_vpx, vpx_profile)

log = logging.getLogger(__name__)

STAGES = {
    1: "block statistics",
    2: "stereo matching",
    3: "left-right consistency",
    4: "v-disparity histogram",
    5: "road path extraction",
    6: "road profile fit",
    7: "road mask",
    8: "bilateral filter",
    9: "edge detection",
    10: "vanishing-point voting",
    11: "vanishing-point fit",
    12: "lane validation",
}


@dataclass(frozen=True)
class PipelineConfig:
    # stereo
    rho: int = 3
    tau: int = 1
    d_min: int = 0
    d_max: int = 64
    tr_lrc: int = 3
    sigma_floor: float = 1e-4
    # road profile
    lambda_y: float = 30.0
    tr_y: float = 4.0
    eps_y: float = 0.99
    # road mask and edges
    varpi: float = 3.0
    sigma_s: float = 300.0
    sigma_r: float = 0.3
    bf_window: int = 11
    sobel_threshold: float = 100.0  # on the 0-255 scale
    # vanishing point
    eps_g: float = 1e-3
    chi: int = 25
    rho_vote: float = 1.0
    lambda_x: float = 10.0
    tr_x: float = 16.0
    eps_x: float = 0.99
    kappa: float = 1.0
    # lane validation
    sigma_g: float = 3.5
    nu: int = 1
    varsigma: int = 3
    lambda_g: float = 1.0
    xi: float = 0.5
    tr_lpv: float | None = None
    tr_lpv_factor: float = 0.15
    min_lane_sep: int = 20
    # shared
    ransac_max_iterations: int = 200
    rng_seed: int = 0
    paper_sign: bool = False

    def __post_init__(self):
        self.stereo()  # validates the stereo subset
        if self.bf_window < 1 or self.bf_window % 2 == 0:
            raise ValueError("bf_window must be a positive odd integer")
        for name in ("eps_y", "eps_x"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        for name in ("lambda_y", "lambda_x", "tr_y", "tr_x", "sigma_s", "sigma_r", "sigma_g",
                     "varpi", "sobel_threshold", "rho_vote", "kappa", "eps_g"):
            if getattr(self, name) < 0 or (name in ("sigma_s", "sigma_r", "sigma_g", "kappa", "tr_y", "tr_x")
                                           and getattr(self, name) == 0):
                raise ValueError(f"{name} out of range: {getattr(self, name)}")
        if self.chi < 0 or self.nu < 0 or self.varsigma < 0 or self.min_lane_sep < 0:
            raise ValueError("chi, nu, varsigma and min_lane_sep must be >= 0")
        if self.xi < 0:
            raise ValueError("xi must be >= 0")
        if self.ransac_max_iterations < 1:
            raise ValueError("ransac_max_iterations must be >= 1")

    def stereo(self) -> StereoConfig:
        return StereoConfig(rho=self.rho, d_min=self.d_min, d_max=self.d_max, tau=self.tau,
                            tr_lrc=self.tr_lrc, sigma_floor=self.sigma_floor)

    def ransac_y(self) -> RansacConfig:
        return RansacConfig(tolerance=self.tr_y, inlier_fraction=self.eps_y, sample_size=3,
                            max_iterations=self.ransac_max_iterations, rng_seed=self.rng_seed)

    def ransac_x(self) -> RansacConfig:
        return RansacConfig(tolerance=self.tr_x, inlier_fraction=self.eps_x, sample_size=5,
                            max_iterations=self.ransac_max_iterations, rng_seed=self.rng_seed + 1)

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "PipelineConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**{k: _coerce(known[k], v) for k, v in values.items()})

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls.from_mapping(parse_kv(Path(path).read_text()))

    def with_overrides(self, values: dict[str, Any]) -> "PipelineConfig":
        merged = dataclasses.asdict(self)
        merged.update(values)
        return type(self).from_mapping(merged)

    def to_text(self) -> str:
        lines = []
        for k, v in dataclasses.asdict(self).items():
            lines.append(f"{k} = {'auto' if v is None else str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict[str, str]:
    """``key = value`` lines; '#' starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key = value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in out:
            raise ValueError(f"line {n}: duplicate key {k!r}")
        out[k] = v
    return out


def _coerce(f: dataclasses.Field, value):
    if not isinstance(value, str):
        if f.name == "tr_lpv" and value is not None:
            return float(value)
        return value
    s = value.strip()
    if f.name == "tr_lpv":
        return None if s.lower() in ("auto", "none", "") else float(s)
    if f.type in ("bool", bool):
        if s.lower() in ("1", "true", "yes", "on"):
            return True
        if s.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{f.name}: not a boolean: {value!r}")
    if f.type in ("int", int):
        return int(s)
    if f.type in ("float", float):
        return float(s)
    return s


@dataclass
class PipelineReport:
    stage_times: dict[str, float] = field(default_factory=dict)
    total_time: float = 0.0
    image_size: list[int] = field(default_factory=list)
    beta: list[float] = field(default_factory=list)
    gamma: list[float] = field(default_factory=list)
    horizon_row: int = 0
    horizon_flag: bool = False
    lane_count: int = 0
    lanes: list[dict] = field(default_factory=list)
    ransac: dict[str, dict] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    tr_lpv: float = 0.0
    vp_profile: list[list[float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PipelineReport":
        return cls(**json.loads(text))


@dataclass
class PipelineResult:
    lanes: LaneSet
    report: PipelineReport
    artifacts: dict[str, Any]


class _Timer:
    def __init__(self, report: PipelineReport):
        self.report = report

    def __call__(self, stage: int):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.report.stage_times[f"{stage:02d} {STAGES[stage]}"] = time.perf_counter() - self.t0
                return False

        return _Ctx()


def _ransac_summary(res) -> dict:
    return dict(iterations=int(res.iterations), inlier_fraction=float(res.inlier_fraction),
                converged=bool(res.converged), n_points=int(len(res.inliers)),
                n_inliers=int(res.inliers.sum()))


def run_pipeline(left, right, cfg: PipelineConfig = PipelineConfig(), threads: int = 1,
                 out_dir=None, emit_all: bool = False) -> PipelineResult:
    """Detect lanes in a rectified stereo pair.

    Intermediate arrays are returned in ``artifacts``.  When ``out_dir`` is
    given the standard outputs are written there, plus one file per stage
    with ``emit_all``.
    """
    t_start = time.perf_counter()
    left = as_gray(left)
    right = as_gray(right)
    if left.shape != right.shape:
        raise ValueError(f"stereo pair shapes differ: {left.shape} vs {right.shape}")
    h, w = left.shape
    v_max = h - 1
    rep = PipelineReport(image_size=[w, h])
    timed = _Timer(rep)
    art: dict[str, Any] = {}
    scfg = cfg.stereo()

    with timed(1):
        stats_l = precompute_stats(left, cfg.rho)
        stats_r = precompute_stats(right, cfg.rho)
    art["stats_l"], art["stats_r"] = stats_l, stats_r

    with timed(2):
        kw = dict(stats_l=stats_l, stats_r=stats_r)
        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=2) as pool:
                fl = pool.submit(estimate_disparity_srp, left, right, scfg, reference="left", **kw)
                fr = pool.submit(estimate_disparity_srp, left, right, scfg, reference="right", **kw)
                lf, rt = fl.result(), fr.result()
        else:
            lf = estimate_disparity_srp(left, right, scfg, reference="left", **kw)
            rt = estimate_disparity_srp(left, right, scfg, reference="right", **kw)
    art["disparity_left"], art["disparity_right"] = lf, rt

    with timed(3):
        disp = lrc_check(lf, rt, cfg.tr_lrc)
    art["disparity"] = disp
    rep.counters["valid_disparity"] = int((disp > 0).sum())

    with timed(4):
        hist = build_vdisparity(disp, cfg.d_max)
    art["vdisparity"] = hist

    with timed(5):
        vpath = dp_extract_vpath(hist, cfg.lambda_y, paper_sign=cfg.paper_sign)
    art["vpath"] = vpath
    if vpath.empty:
        raise RoadProfileError(5, STAGES[5], "v-disparity histogram is empty: no road evidence")

    with timed(6):
        supported = vpath.points[vpath.support > 0]
        rep.counters["vpath_points"] = int(len(vpath.points))
        rep.counters["vpath_supported"] = int(len(supported))
        try:
            rb = ransac_beta(supported, cfg.ransac_y())
        except (RansacError, RankDeficientError) as exc:
            raise RoadProfileError(6, STAGES[6], f"degenerate road geometry: {exc}") from exc
        profile = RoadProfile.from_beta(rb.coef, v_max, ransac=rb)
        if profile.horizon_flag:
            rep.flags.append("horizon_clamped")
        if not rb.converged:
            rep.flags.append("beta_ransac_not_converged")
        if profile.horizon_row >= v_max:
            raise RoadProfileError(6, STAGES[6], "fitted road profile has no rows below the horizon")
        try:
            vpy_rows = profile.vpy()
        except SingularProfileError as exc:
            raise RoadProfileError(6, STAGES[6], str(exc)) from exc
        if np.any(profile.beta[1] + 2 * profile.beta[2] * profile.rows <= 0):
            raise RoadProfileError(6, STAGES[6], "road profile is not increasing over the road rows")
    art["profile"] = profile
    rep.beta = [float(b) for b in profile.beta]
    rep.horizon_row = int(profile.horizon_row)
    rep.horizon_flag = bool(profile.horizon_flag)
    rep.ransac["beta"] = _ransac_summary(rb)

    with timed(7):
        mask = road_mask(disp, profile, cfg.varpi)
    art["road_mask"] = mask
    rep.counters["road_pixels"] = int(mask.sum())

    with timed(8):
        smooth = bilateral_filter(left, cfg.sigma_s, cfg.sigma_r, cfg.bf_window // 2, threads=threads)
    art["bilateral"] = smooth

    with timed(9):
        grad = sobel_gradients(smooth)
        edges = edge_map(grad, cfg.sobel_threshold / 255.0, mask)
    art["gradients"], art["edges"] = grad, edges
    rep.counters["edge_pixels"] = int(len(edges))

    with timed(10):
        vpy_full = np.full(h, np.nan)
        vpy_full[profile.horizon_row:] = vpy_rows
        sparse = sparse_vpx(edges, vpy_full, w, cfg.xi, cfg.eps_g)
        acc = accumulate_dense_vpx(sparse, cfg.chi, cfg.rho_vote, profile.horizon_row, v_max)
    art["sparse_vpx"], art["accumulator"] = sparse, acc
    rep.counters["sparse_votes"] = int(len(sparse.vpx))
    rep.counters["sparse_skipped"] = int(sparse.skipped)
    if len(sparse.vpx) == 0:
        raise VanishingPointError(10, STAGES[10], "no edge pixel produced a vanishing-point vote")

    with timed(11):
        upath = dp_extract_upath(acc, cfg.lambda_x, paper_sign=cfg.paper_sign)
        if upath.empty:
            raise VanishingPointError(11, STAGES[11], "accumulator is empty: no vanishing-point evidence")
        pts = upath.points[upath.support > 0]
        rep.counters["upath_points"] = int(len(upath.points))
        rep.counters["upath_supported"] = int(len(pts))
        try:
            rg = ransac_gamma(pts, cfg.ransac_x(), kappa=cfg.kappa)
        except (RansacError, RankDeficientError) as exc:
            raise VanishingPointError(11, STAGES[11], f"cannot fit the vanishing-point curve: {exc}") from exc
        if not rg.converged:
            rep.flags.append("gamma_ransac_not_converged")
        rows = profile.rows
        field_ = VanishingField.from_profiles(vpx_profile(rg.fit, rows), vpy_rows, profile.horizon_row, v_max)
    art["upath"], art["gamma_fit"], art["vp"] = upath, rg.fit, field_
    rep.gamma = [float(g) for g in rg.fit.coef]
    rep.ransac["gamma"] = _ransac_summary(rg)
    rep.vp_profile = [[int(v), float(field_.vpx[v]), float(field_.vpy[v])] for v in rows]

    with timed(12):
        m0 = build_m0(grad, edges, field_, cfg.nu, cfg.varsigma, cfg.sigma_g)
        m1 = build_m1(m0)
        hist_e = aggregate_energy(m1, field_, cfg.xi, cfg.lambda_g, threads=threads)
        n_rows = v_max - profile.horizon_row + 1
        tr = cfg.tr_lpv if cfg.tr_lpv is not None else default_tr_lpv(m1, n_rows, cfg.tr_lpv_factor)
        lanes = select_lanes(hist_e, tr, cfg.min_lane_sep, field_)
    art["m0"], art["m1"], art["energy"] = m0, m1, hist_e
    rep.tr_lpv = float(tr)
    rep.lane_count = len(lanes)
    rep.lanes = [dict(start=int(l.start), energy=float(l.energy),
                      polyline=[[int(v), float(u)] for v, u in zip(l.rows, l.cols)]) for l in lanes.lanes]
    rep.total_time = time.perf_counter() - t_start

    if out_dir is not None:
        write_artifacts(out_dir, left, art, lanes, rep, emit_all)
    return PipelineResult(lanes=lanes, report=rep, artifacts=art)


def write_artifacts(out_dir, left, art, lanes: LaneSet, rep: PipelineReport, emit_all: bool) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def p(name):
        written.append(out / name)
        return out / name

    io.write_disparity_pgm(p("disparity.pgm"), art["disparity"])
    io.write_counts_pgm(p("vdisparity.pgm"), art["vdisparity"])
    io.write_counts_pgm(p("vpx_accumulator.pgm"), art["accumulator"].grid, negate=True)
    io.write_gray(p("edges.png"), art["edges"].to_mask(left.shape))
    io.write_lanes_csv(p("lanes.csv"), lanes.lanes)
    io.draw_overlay(p("overlay.png"), left, lanes.lanes)
    p("report.json").write_text(rep.to_json())
    if emit_all:
        np.savez_compressed(p("01_block_stats.npz"), mu_l=art["stats_l"].mu, sigma_l=art["stats_l"].sigma,
                            mu_r=art["stats_r"].mu, sigma_r=art["stats_r"].sigma)
        io.write_disparity_pgm(p("02_disparity_left.pgm"), art["disparity_left"])
        io.write_disparity_pgm(p("02_disparity_right.pgm"), art["disparity_right"])
        io.write_disparity_pgm(p("03_disparity_lrc.pgm"), art["disparity"])
        io.write_counts_pgm(p("04_vdisparity.pgm"), art["vdisparity"])
        io.write_csv(p("05_vdisparity_path.csv"), ["d", "v", "count"],
                     [(int(d), int(v), int(c)) for (d, v), c in zip(art["vpath"].points, art["vpath"].support)])
        prof = art["profile"]
        io.write_csv(p("06_road_profile.csv"), ["v", "f", "vpy"],
                     [(int(v), f"{float(road_fn(prof.beta, v)):.6f}", f"{float(y):.6f}")
                      for v, y in zip(prof.rows, prof.vpy())])
        io.write_gray(p("07_road_mask.png"), art["road_mask"])
        io.write_gray(p("08_bilateral.png"), art["bilateral"])
        io.write_gray(p("09_edges.png"), art["edges"].to_mask(left.shape))
        sp = art["sparse_vpx"]
        io.write_csv(p("10_sparse_vpx.csv"), ["u", "v", "vpx"],
                     [(int(a), int(b), int(c)) for a, b, c in zip(sp.u, sp.v, sp.vpx)])
        io.write_counts_pgm(p("10_vpx_accumulator.pgm"), art["accumulator"].grid, negate=True)
        vp = art["vp"]
        io.write_csv(p("11_vp_profile.csv"), ["v", "vpx", "vpy"],
                     [(int(v), f"{vp.vpx[v]:.6f}", f"{vp.vpy[v]:.6f}") for v in range(vp.horizon, vp.v_max + 1)])
        e = art["energy"]
        io.write_csv(p("12_energy_histogram.csv"), ["start_u", "energy"],
                     [(i - e.offset, f"{x:.6f}") for i, x in enumerate(e.values)])
    return written


def lanes_signature(lanes: LaneSet) -> tuple:
    """Hashable exact fingerprint of a lane set (for determinism checks)."""
    return tuple((l.start, l.energy, l.rows.tobytes(), l.cols.tobytes()) for l in lanes.lanes)


def _warmup():
    # Compile numba kernels outside any timed region.
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 1, (16, 24))
    c = StereoConfig(rho=1, d_max=3)
    estimate_disparity_srp(a, a, c)
    estimate_disparity_naive(a, a, c)
    bilateral_filter(a, rho=1)


def bench(cfg: PipelineConfig | None = None, scene: dict | None = None, repetitions: int = 3,
          threads: int = 1) -> dict:
    """Median stage timings and the memoised-vs-naive NCC speed ratio.

    ``scene`` holds keyword arguments for the testkit scene generator
    (default 320x240).  The ratio compares full-range left-view matching
    with recomputed block statistics against precomputed ones, stats
    precomputation included.
    """
    from .testkit.scene import gen_scene

    kw = dict(width=320, height=240)
    kw.update(scene or {})
    sc = gen_scene(**kw)
    if cfg is None:
        cfg = PipelineConfig(d_max=sc.d_max)
    scfg = cfg.stereo()
    _warmup()
    stage: dict[str, list[float]] = {}
    memo_t, naive_t = [], []
    identical = True
    for _ in range(max(1, repetitions)):
        try:
            res = run_pipeline(sc.left, sc.right, cfg, threads=threads)
            for k, v in res.report.stage_times.items():
                stage.setdefault(k, []).append(v)
        except Exception as exc:  # timing table still useful for the stereo ratio
            log.warning("pipeline failed during bench: %s", exc)
        t0 = time.perf_counter()
        stats_l = precompute_stats(sc.left, cfg.rho)
        stats_r = precompute_stats(sc.right, cfg.rho)
        memo = estimate_disparity_srp(sc.left, sc.right, scfg, stats_l=stats_l, stats_r=stats_r, full_search=True)
        memo_t.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        naive = estimate_disparity_naive(sc.left, sc.right, scfg, full_search=True)
        naive_t.append(time.perf_counter() - t0)
        identical &= bool(np.array_equal(memo, naive))
    eta = statistics.median(naive_t) / statistics.median(memo_t)
    return dict(
        image_size=[int(sc.left.shape[1]), int(sc.left.shape[0])],
        rho=cfg.rho, d_max=cfg.d_max, repetitions=repetitions,
        low_confidence=repetitions < 2,
        stage_medians={k: statistics.median(v) for k, v in sorted(stage.items())},
        memo_seconds=statistics.median(memo_t), naive_seconds=statistics.median(naive_t),
        eta=eta, identical_disparity=identical,
    )
