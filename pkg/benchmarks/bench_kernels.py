"""Compare the numba and pure-numpy kernels.

    python benchmarks/bench_kernels.py [--repeat N]

Both variants are called directly, so the FLOWEVAL_DISABLE_NUMBA flag does
not matter here. Results are checked for equality before timing.
"""

from __future__ import annotations

import argparse
import random
import timeit

import numpy as np

from floweval import kernels
from floweval._accel import HAS_NUMBA
from floweval.synth import EXTRA, NOUNS, VERBS


def labels(rng: random.Random, n: int) -> list[str]:
    return [f"{rng.choice(VERBS)} {rng.choice(NOUNS)} {rng.choice(EXTRA)}".lower() for _ in range(n)]


def best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = random.Random(0)
    print(f"{'kernel':<28}{'size':>10}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for n in (20, 60, 200):
        left, right = labels(rng, n), labels(rng, n)
        lb, lo = kernels.pack(left)
        rb, ro = kernels.pack(right)
        a = kernels.similarity_matrix_jit(lb, lo, rb, ro)
        b = kernels.similarity_matrix_np(lb, lo, rb, ro)
        assert np.allclose(a, b)
        t_jit = best(lambda: kernels.similarity_matrix_jit(lb, lo, rb, ro), args.repeat)
        t_np = best(lambda: kernels.similarity_matrix_np(lb, lo, rb, ro), args.repeat)
        print(f"{'similarity_matrix':<28}{f'{n}x{n}':>10}{t_jit * 1e3:>12.3f}{t_np * 1e3:>12.3f}{t_np / t_jit:>9.1f}x")
        # the matching code only needs pairs at or above the 0.9 threshold
        t_np = best(lambda: kernels.similarity_matrix_np(lb, lo, rb, ro, 0.9), args.repeat)
        print(f"{'similarity_matrix floor=0.9':<28}{f'{n}x{n}':>10}{t_jit * 1e3:>12.3f}{t_np * 1e3:>12.3f}{t_np / t_jit:>9.1f}x")

    nprng = np.random.default_rng(0)
    for n in (100, 1000, 5000):
        x = nprng.integers(0, 20, n).astype(np.float64)
        y = nprng.integers(0, 20, n).astype(np.float64)
        assert kernels.kendall_counts_jit(x, y) == kernels.kendall_counts_np(x, y)
        t_jit = best(lambda: kernels.kendall_counts_jit(x, y), args.repeat)
        t_np = best(lambda: kernels.kendall_counts_np(x, y), args.repeat)
        print(f"{'kendall_counts':<28}{n:>10}{t_jit * 1e3:>12.3f}{t_np * 1e3:>12.3f}{t_np / t_jit:>9.1f}x")


if __name__ == "__main__":
    main()
