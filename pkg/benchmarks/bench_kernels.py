"""Compare the compiled pixel-power kernel with the numpy fallback.

Run: python benchmarks/bench_kernels.py [--sizes 48x60,240x320,480x640] [--repeat 20]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from thermpower import _kernels_py

try:
    from thermpower import _kernels
except ImportError:  # extension not built
    _kernels = None


def make_inputs(shape, seed=0):
    rng = np.random.default_rng(seed)
    t = 300.0 + 50.0 * rng.random(shape)
    mat = rng.integers(0, 3, size=shape).astype(np.intp)
    c = np.array([[1e-3, 2e-3, 3e-3], [2e-3, 5e-3, 4e-3], [3e-3, 4e-3, 6e-3]])
    eps = np.array([1.0, 0.2, 1.0])
    return (t, mat, c, eps, 8e-5, 2e-13, 300.0, True, True)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="48x60,240x320,480x640")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    print(f"{'shape':>10} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8} identical")
    for spec in args.sizes.split(","):
        shape = tuple(int(x) for x in spec.split("x"))
        inputs = make_inputs(shape)
        t_np = min(timeit.repeat(lambda: _kernels_py.pixel_powers(*inputs), number=1, repeat=args.repeat))
        if _kernels is None:
            print(f"{spec:>10} {t_np * 1e3:10.3f} {'n/a':>10} {'n/a':>8} n/a")
            continue
        t_cy = min(timeit.repeat(lambda: _kernels.pixel_powers(*inputs), number=1, repeat=args.repeat))
        same = np.array_equal(
            _kernels_py.pixel_powers(*inputs), _kernels.pixel_powers(*inputs), equal_nan=True
        )
        print(f"{spec:>10} {t_np * 1e3:10.3f} {t_cy * 1e3:10.3f} {t_np / t_cy:8.1f} {same}")


if __name__ == "__main__":
    main()
