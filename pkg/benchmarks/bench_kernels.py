"""Time the numba kernels against their numpy fallbacks on the same inputs.

Run with ``python3 benchmarks/bench_kernels.py``. Each row reports the best
of a few repeats after one warm-up call, and whether the outputs agree.
"""

import time

import numpy as np

from evalues import _kernels as kr


def best_time(fn, *args, repeats=3):
    fn(*args)  # warm-up, triggers compilation
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return bool(np.allclose(a, b, rtol=1e-9, atol=1e-12, equal_nan=True))


def cases():
    rng = np.random.default_rng(42)
    up, down = np.log(0.6 / 0.5), np.log(0.4 / 0.5)
    inc = np.where(rng.random((2000, 512)) < 0.55, up, down)
    start = np.zeros(2000)
    yield "first_exit 2000x512", kr._first_exit_loop, kr._first_exit_numpy, (inc, start, np.log(0.05), np.log(20.0))

    es = rng.choice([0.0, 4.0], size=5000)
    uniques, codes = np.unique(es, return_inverse=True)
    codes = codes.astype(np.int64)
    yield "adaptive_path n=5000", kr._adaptive_path_loop, kr._adaptive_path_numpy, (codes, uniques, 1.0, 1e-10)

    desc = np.sort(rng.exponential(20.0, 150))[::-1].copy()
    yield "closed_mean_scan K=150", kr._closed_mean_loop, kr._closed_mean_numpy, (desc, 0.05)

    x = np.where(rng.random(200) < 0.25, -1.0, 1.0) + rng.standard_normal(200)
    inits = rng.standard_normal((10, 2))
    yield "em_two_means n=200", kr._em_two_means_loop, kr._em_two_means_numpy, (x, 0.25, inits, 200, 1e-10)


def main():
    if not kr.NUMBA_ENABLED:
        print("numba is disabled (EVALUES_DISABLE_NUMBA); nothing to compare")
        return
    print(f"{'kernel':<26}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}  agree")
    for name, fast, slow, args in cases():
        t_fast, out_fast = best_time(fast, *args)
        t_slow, out_slow = best_time(slow, *args)
        print(f"{name:<26}{t_fast * 1e3:>10.2f}{t_slow * 1e3:>10.2f}{t_slow / t_fast:>8.1f}x  {same(out_fast, out_slow)}")


if __name__ == "__main__":
    main()
