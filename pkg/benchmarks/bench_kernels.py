"""Time the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--sizes 32 64] [--repeat 5]``.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from cgolab import _kernels_py, kernels
from cgolab.spectral import make_grid

try:
    from cgolab import _kernels as compiled
except ImportError:
    compiled = None


def _cases(N: int):
    spec = make_grid(3, N)
    rng = np.random.default_rng(0)
    xi = kernels._axis(spec)
    c = rng.normal(size=spec.shape) + 1j * rng.normal(size=spec.shape)
    zeta = np.array([1.0, 1j, -0.05j])
    center = np.array([0.5, 0.0, 0.25])
    return {
        "weighted_sq_sum": lambda m: m.weighted_sq_sum(xi, c, zeta, 0.05, -1.0),
        "divide_symbol": lambda m: m.divide_symbol(xi, c, zeta, 0.05, 1e-9, 1.0),
        "ball_symbol_sum": lambda m: m.ball_symbol_sum(xi, center, N / 4, zeta, 0.05, 1.0, 1.0),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[32, 64])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if compiled is None:
        print("compiled kernels unavailable; only the fallback is timed")
    print(f"{'kernel':<18}{'N':>5}{'numpy [ms]':>13}{'compiled [ms]':>15}{'speedup':>10}")
    for N in args.sizes:
        for name, call in _cases(N).items():
            slow = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat)) * 1e3
            if compiled is None:
                print(f"{name:<18}{N:>5}{slow:>13.2f}{'-':>15}{'-':>10}")
                continue
            fast = min(timeit.repeat(lambda: call(compiled), number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<18}{N:>5}{slow:>13.2f}{fast:>15.2f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
