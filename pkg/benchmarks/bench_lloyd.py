"""Time the compiled and NumPy Lloyd kernels on identical inputs.

    python3 benchmarks/bench_lloyd.py [--repeat 5]

Also checks that both kernels return the same bits on every case.
"""

import argparse
import timeit

import numpy as np

from popcompress import _lloyd_py

try:
    from popcompress import _lloyd
except ImportError:
    _lloyd = None

CASES = [(50, 2), (50, 8), (1000, 16), (5000, 16), (20000, 32), (20000, 256)]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--beta", type=float, default=0.0)
    args = parser.parse_args()
    if _lloyd is None:
        print("compiled kernel not built; only the NumPy path is available")
    print(f"{'d':>6} {'K':>4} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}  same bits")
    rng = np.random.default_rng(0)
    for d, k in CASES:
        w, h = rng.standard_normal(d), rng.random(d) + 0.01
        init = rng.choice(w, k, replace=False)
        call = (w, h, init, args.beta, 100, args.beta > 0)
        t_py = min(timeit.repeat(lambda: _lloyd_py.run_lloyd(*call), number=1, repeat=args.repeat))
        if _lloyd is None:
            print(f"{d:>6} {k:>4} {t_py * 1e3:>10.2f}")
            continue
        t_cy = min(timeit.repeat(lambda: _lloyd.run_lloyd(*call), number=1, repeat=args.repeat))
        a, b = _lloyd_py.run_lloyd(*call), _lloyd.run_lloyd(*call)
        same = (a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()
                and a[2] == b[2] and a[3].tobytes() == b[3].tobytes())
        print(f"{d:>6} {k:>4} {t_py * 1e3:>10.2f} {t_cy * 1e3:>10.2f} {t_py / t_cy:>8.1f}  {same}")


if __name__ == "__main__":
    main()
