"""Compare the numba kernels against the pure-numpy fallback.

The backend is chosen at import time via the TUBEKIT_NUMBA env var, so this
script times the private implementations directly instead of re-importing.

    python3 benchmarks/bench_kernels.py [--sizes 100 1000 5000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from tubekit import kernels


def _boxes(rng, n):
    xy = rng.uniform(0, 1200, size=(n, 2))
    wh = rng.uniform(8, 120, size=(n, 2))
    return np.hstack([xy, xy + wh])


def _intervals(rng, n):
    s = rng.integers(0, 5000, size=(n, 1)).astype(np.float64)
    return np.hstack([s, s + rng.integers(1, 300, size=(n, 1))])


def _time(fn, args, repeat):
    fn(*args)  # warm up (jit compilation for the numba path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 1000, 5000])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not kernels.NUMBA_ENABLED:
        raise SystemExit("numba backend unavailable (TUBEKIT_NUMBA=0 set?); nothing to compare")

    rng = np.random.default_rng(0)
    pairs = [
        ("iou_matrix", kernels._iou_matrix_nb, kernels._iou_matrix_np, _boxes),
        ("paired_iou", kernels._paired_iou_nb, kernels._paired_iou_np, _boxes),
        ("temporal_iou_matrix", kernels._temporal_iou_matrix_nb,
         kernels._temporal_iou_matrix_np, _intervals),
    ]
    print(f"{'kernel':<22}{'n':>7}{'numba (ms)':>13}{'numpy (ms)':>13}{'speedup':>9}")
    for name, nb, npf, make in pairs:
        for n in args.sizes:
            a, b = make(rng, n), make(rng, n)
            assert np.allclose(nb(a, b), npf(a, b), atol=1e-12)
            t_nb = _time(nb, (a, b), args.repeat)
            t_np = _time(npf, (a, b), args.repeat)
            print(f"{name:<22}{n:>7}{t_nb * 1e3:>13.3f}{t_np * 1e3:>13.3f}"
                  f"{t_np / t_nb:>9.2f}x")


if __name__ == "__main__":
    main()
