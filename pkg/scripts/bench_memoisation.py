"""Memoised vs recomputed block statistics across window radii.

    python3 scripts/bench_memoisation.py [--width 320 --height 240 --reps 3]
"""

import argparse

from stereolane import PipelineConfig
from stereolane.pipeline import bench
from stereolane.testkit import gen_scene


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--width", type=int, default=320)
    ap.add_argument("--height", type=int, default=240)
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args()

    d_max = gen_scene(width=args.width, height=args.height, lanes=()).d_max
    print(f"{'rho':>4s} {'memo s':>9s} {'naive s':>9s} {'eta':>6s} identical")
    for rho in (1, 2, 3):
        t = bench(PipelineConfig(rho=rho, d_max=d_max), dict(width=args.width, height=args.height),
                  repetitions=args.reps)
        print(f"{rho:4d} {t['memo_seconds']:9.3f} {t['naive_seconds']:9.3f} {t['eta']:6.2f} {t['identical_disparity']}")


if __name__ == "__main__":
    main()
