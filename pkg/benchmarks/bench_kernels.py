"""Time the compiled and numpy kernels on the same inputs.

    python3 benchmarks/bench_kernels.py --rows 10000 --K 10 100
"""
import argparse
import timeit

import numpy as np

from negdep import kernels


def cases(rows, K, rng):
    P = rng.random((rows, K))
    mask = np.arange(K) < K // 2
    E = rng.exponential(size=(rows, min(K, 20)))
    return {
        "simes_rows": lambda m: m.simes_rows(P),
        "bh_rows": lambda m: m.bh_rows(P, mask, 0.1),
        "esym_rows(k=3)": lambda m: m.esym_rows(E, 3),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=10_000)
    ap.add_argument("--K", type=int, nargs="+", default=[10, 100])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.backends()
    names = sorted(backends)
    rng = np.random.default_rng(0)
    print(f"default backend: {kernels.BACKEND}")
    print(f"{'kernel':<16}{'K':>5}" + "".join(f"{n + ' ms':>14}" for n in names)
          + ("     speedup" if len(names) == 2 else ""))
    for K in args.K:
        for label, fn in cases(args.rows, K, rng).items():
            times = {}
            for n in names:
                fn(backends[n])  # warm up
                t = min(timeit.repeat(lambda: fn(backends[n]), number=1, repeat=args.repeat))
                times[n] = 1e3 * t
            line = f"{label:<16}{K:>5}" + "".join(f"{times[n]:>14.2f}" for n in names)
            if len(names) == 2:
                line += f"{times['numpy'] / times['cython']:>11.1f}x"
            print(line)


if __name__ == "__main__":
    main()
