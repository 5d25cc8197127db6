#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--sizes 100 1000 3000] [--repeat 5]

Both paths live side by side in ``nodulecad._kernels``, so one process times
both; the first numba call (compilation or cache load) is excluded.  Results
are checked for equality before any timing is reported.
"""

import argparse
import time

import numpy as np

from nodulecad import _kernels


def random_boxes(rng, n):
    xy = rng.uniform(0.0, 0.9, (n, 2))
    wh = rng.uniform(0.01, 0.1, (n, 2))
    return np.hstack([xy, xy + wh])


def best_of(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 1000, 3000])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba path disabled or unavailable; unset NODULECAD_DISABLE_NUMBA to compare")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<14}{'n':>7}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for n in args.sizes:
        boxes = random_boxes(rng, n)
        cats = rng.integers(0, 2, n)
        ious = _kernels.iou_matrix_numpy(boxes, boxes[: max(n // 4, 1)])
        cases = [
            ("iou_matrix", _kernels.iou_matrix_numpy, _kernels.iou_matrix_numba, (boxes, boxes)),
            ("nms_keep", _kernels.nms_keep_numpy, _kernels.nms_keep_numba, (boxes, cats, 0.45)),
            ("greedy_match", _kernels.greedy_match_numpy, _kernels.greedy_match_numba, (ious, 0.2)),
        ]
        for name, slow, fast, call_args in cases:
            if not np.array_equal(slow(*call_args), fast(*call_args)):
                raise SystemExit(f"{name}: backends disagree at n={n}")
            t_np = best_of(slow, call_args, args.repeat)
            t_nb = best_of(fast, call_args, args.repeat)
            print(f"{name:<14}{n:>7}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
