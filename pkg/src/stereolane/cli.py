"""Command-line entry point: ``detect``, ``synth`` and ``bench``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import StageError
from .pipeline import PipelineConfig, bench, parse_kv, run_pipeline


def _load_config(path, overrides) -> PipelineConfig:
    values = parse_kv(Path(path).read_text()) if path else {}
    for item in overrides or ():
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    return PipelineConfig.from_mapping(values)


def cmd_detect(args) -> int:
    cfg = _load_config(args.config, args.set)
    left = io.read_gray(args.left)
    right = io.read_gray(args.right)
    try:
        res = run_pipeline(left, right, cfg, threads=args.threads, out_dir=args.out_dir, emit_all=args.emit_all)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rep = res.report
    print(f"{rep.lane_count} lanes, starts {res.lanes.starts}, horizon row {rep.horizon_row}, "
          f"{rep.total_time:.2f} s")
    return 0


def cmd_synth(args) -> int:
    from .testkit.scene import gen_scene, random_scene_params

    kw = random_scene_params(args.seed, width=args.width, height=args.height) if args.random else \
        dict(width=args.width, height=args.height, seed=args.seed)
    sc = gen_scene(**kw)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_gray(out / "left.png", sc.left)
    io.write_gray(out / "right.png", sc.right)
    io.write_disparity_pgm(out / "true_disparity.pgm", sc.true_disparity)
    truth = dict(
        params={k: (list(v) if isinstance(v, tuple) else v) for k, v in sc.params.items()},
        beta=sc.true_beta.tolist(),
        horizon_row=sc.horizon,
        d_max=sc.d_max,
        vp=[[v, float(sc.true_vp.vpx[v]), float(sc.true_vp.vpy[v])] for v in range(sc.horizon, sc.true_vp.v_max + 1)],
        lanes=[dict(bottom=l.bottom, polyline=[[int(v), float(u)] for v, u in zip(l.rows, l.cols) if np.isfinite(u)])
               for l in sc.true_lanes],
    )
    (out / "truth.json").write_text(json.dumps(truth, indent=2))
    (out / "scene.cfg").write_text(f"d_max = {sc.d_max}\nrng_seed = {args.seed}\n")
    print(f"wrote scene (seed {args.seed}, d_max {sc.d_max}) to {out}")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args.config, args.set)
    scene = dict(width=args.width, height=args.height, seed=args.seed)
    if args.config is None and not any(s.startswith("d_max") for s in args.set or ()):
        cfg = None  # let bench size d_max to the scene
    table = bench(cfg, scene, repetitions=args.repetitions, threads=args.threads)
    if args.json:
        print(json.dumps(table, indent=2))
        return 0
    for k, v in table["stage_medians"].items():
        print(f"{k:<32s} {v * 1e3:10.2f} ms")
    flag = " (low confidence: single sample)" if table["low_confidence"] else ""
    print(f"memoised NCC {table['memo_seconds']:.3f} s, naive {table['naive_seconds']:.3f} s, "
          f"eta = {table['eta']:.2f}{flag}, identical = {table['identical_disparity']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stereolane", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="detect lanes in a rectified stereo pair")
    d.add_argument("--left", required=True)
    d.add_argument("--right", required=True)
    d.add_argument("--config", default=None, help="key = value file")
    d.add_argument("--out-dir", required=True)
    d.add_argument("--emit-all", action="store_true", help="write one artifact per stage")
    d.add_argument("--threads", type=int, default=1)
    d.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("synth", help="render a synthetic stereo scene with ground truth")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--width", type=int, default=640)
    s.add_argument("--height", type=int, default=360)
    s.add_argument("--random", action="store_true", help="jitter road, lanes and vanishing point by seed")
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("bench", help="stage timings and memoisation speed-up")
    b.add_argument("--config", default=None)
    b.add_argument("--set", action="append", metavar="KEY=VALUE")
    b.add_argument("--repetitions", type=int, default=3)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--width", type=int, default=320)
    b.add_argument("--height", type=int, default=240)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
