"""Timing comparison of the numba and pure-numpy conv kernels.

Run as ``python3 -m augvoc.benchmark``. Workload shapes match the desk
profile (batch 8, 2048-sample segments). Results from both backends are
checked against each other before timing, so the table doubles as a parity
check.
"""

import time

import numpy as np

from . import _kernels_numpy

try:
    from . import _kernels_numba
except ImportError:
    _kernels_numba = None

REPEATS = 5
INNER = 3


def _workloads(rng):
    x_res = rng.standard_normal((8, 24, 512))
    w_res = rng.standard_normal((24, 24, 3)) * 0.1
    x_d = rng.standard_normal((8, 16, 2048))
    w_d = rng.standard_normal((24, 16, 11)) * 0.1
    x_up = rng.standard_normal((8, 48, 128))
    w_up = rng.standard_normal((48, 24, 8)) * 0.1
    gy_d = rng.standard_normal((8, 24, 512))
    return [
        ("resblock conv (k3)", "conv1d_fw", (x_res, w_res, 1, 1, 1)),
        ("strided disc conv (k11 s4)", "conv1d_fw", (x_d, w_d, 4, 1, 5)),
        ("upsample 4x (transposed)", "conv1d_gx", (x_up, w_up, 4, 1, 2, 512)),
        ("input grad (k11 s4)", "conv1d_gx", (gy_d, w_d, 4, 1, 5, 2048)),
        ("weight grad (k11 s4)", "conv1d_gw", (x_d, gy_d, 4, 1, 5, 11)),
    ]


def _best_time(fn, args):
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        for _ in range(INNER):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / INNER)
    return best


def main():
    rng = np.random.default_rng(0)
    works = _workloads(rng)

    if _kernels_numba is None:
        print("numba unavailable; timing the numpy kernels only")
    else:
        # first calls pay the JIT cost; run everything once before timing
        for _name, kernel, args in works:
            getattr(_kernels_numba, kernel)(*args)

    rows = []
    for name, kernel, args in works:
        t_np = _best_time(getattr(_kernels_numpy, kernel), args)
        if _kernels_numba is None:
            rows.append((name, t_np, None, None))
            continue
        ref = getattr(_kernels_numpy, kernel)(*args)
        got = getattr(_kernels_numba, kernel)(*args)
        err = float(np.max(np.abs(ref - got)))
        if err > 1e-9:
            raise AssertionError(f"{name}: backends disagree by {err:.3e}")
        t_nb = _best_time(getattr(_kernels_numba, kernel), args)
        rows.append((name, t_np, t_nb, t_np / t_nb))

    width = max(len(r[0]) for r in rows)
    print(f"{'workload':<{width}}  {'numpy':>9}  {'numba':>9}  {'speedup':>7}")
    for name, t_np, t_nb, ratio in rows:
        numba_col = f"{t_nb * 1e3:7.2f}ms" if t_nb is not None else "      n/a"
        ratio_col = f"{ratio:6.2f}x" if ratio is not None else "    n/a"
        print(f"{name:<{width}}  {t_np * 1e3:7.2f}ms  {numba_col}  {ratio_col}")


if __name__ == "__main__":
    main()
