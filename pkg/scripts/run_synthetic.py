"""Detection rate and false positives over seeded random scenes.

    python3 scripts/run_synthetic.py --first 0 --count 20 [--threads N]
"""

import argparse
import time

import numpy as np

from stereolane import PipelineConfig, run_pipeline
from stereolane.errors import StageError
from stereolane.testkit import gen_scene, random_scene_params


def match(truth, starts, tol):
    used, errs = set(), []
    for b in sorted(truth):
        cand = sorted((abs(x - b), i) for i, x in enumerate(starts) if i not in used)
        if cand and cand[0][0] <= tol:
            used.add(cand[0][1])
            errs.append(cand[0][0])
    return errs, len(starts) - len(used)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--first", type=int, default=0)
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--tol", type=float, default=5.0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    total = hits = fp = 0
    acc = []
    t0 = time.perf_counter()
    for s in range(args.first, args.first + args.count):
        sc = gen_scene(**random_scene_params(s))
        try:
            res = run_pipeline(sc.left, sc.right, PipelineConfig(d_max=sc.d_max, rng_seed=s), threads=args.threads)
        except StageError as exc:
            print(f"seed {s:4d}: {exc}")
            total += len(sc.lane_bottoms)
            continue
        d = res.artifacts["disparity"]
        acc.append(np.mean(np.abs(d - sc.true_disparity)[d > 0] <= 1))
        errs, f = match(sc.lane_bottoms, res.lanes.starts, args.tol)
        total += len(sc.lane_bottoms)
        hits += len(errs)
        fp += f
        miss = len(sc.lane_bottoms) - len(errs)
        if miss or f:
            print(f"seed {s:4d}: truth {np.round(sorted(sc.lane_bottoms)).astype(int).tolist()} "
                  f"found {sorted(res.lanes.starts)}")
    print(f"seeds {args.first}..{args.first + args.count - 1}: detected {hits}/{total} "
          f"({hits / max(total, 1):.1%}), false positives {fp}, "
          f"disparity within 1 px {np.mean(acc):.1%}, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
