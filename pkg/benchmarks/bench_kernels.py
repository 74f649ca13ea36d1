"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends get the same seeds, so the script also checks they agree.
"""

import argparse
import timeit

import numpy as np

from offswitch.kernels import _pykernels

try:
    from offswitch.kernels import _ckernels
except ImportError:
    _ckernels = None

CASES = {
    "glitch_trials 1e5 x B=3": lambda k: k.glitch_trials(1, 100_000, 3, 0.3, 0.05, 0.5),
    "edit_trials 1e5 x 8": lambda k: k.edit_trials(2, 100_000, 8, 0.9, 0.05),
    "forgery_attempts 1e3 x 2^12": lambda k: k.forgery_attempts(
        3, np.arange(1000, dtype=np.uint64), np.full(1000, 12, dtype=np.int64), 1 << 20),
    "collision_trials 2e3 x 300 @ 16b": lambda k: k.collision_trials(4, 2000, 300, 16),
}


def same(a, b):
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'kernel':36} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, call in CASES.items():
        py = min(timeit.repeat(lambda: call(_pykernels), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:36} {py:10.4f} {'-':>10} {'-':>8}")
            continue
        cy = min(timeit.repeat(lambda: call(_ckernels), number=1, repeat=args.repeat))
        agree = same(call(_pykernels), call(_ckernels))
        print(f"{name:36} {py:10.4f} {cy:10.4f} {py / cy:7.0f}x{'' if agree else '  MISMATCH'}")


if __name__ == "__main__":
    main()
