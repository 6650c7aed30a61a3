"""Compare the compiled and numpy edge kernels.

    python benchmarks/bench_kernels.py [--n 100] [--m 1000] [--iters 2000]

Times a single select_edge call (best of several repeats) and a full
boosting run with each backend, and checks that both produce the same
selections and bit-identical edges.
"""

import argparse
import time

import numpy as np

from optboost import booster, kernels
from optboost.corpus import random_matrix_pool
from optboost.dataset import Dataset


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def full_run(data, pool, iters, module):
    saved = kernels._impl
    kernels._impl = module
    try:
        t0 = time.perf_counter()
        _, trace = booster.run(data, pool, iters)
        return time.perf_counter() - t0, trace
    finally:
        kernels._impl = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--m", type=int, default=1000)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    data = Dataset(rng.normal(size=(args.n, 3)), rng.choice([-1, 1], size=args.n))
    pool = random_matrix_pool(rng, data, args.m)
    w = rng.dirichlet(np.ones(args.n))
    mt = pool.mistake_t

    avail = kernels.backends()
    if "cython" not in avail:
        print("compiled extension not built; only the numpy fallback is available")
    print(f"n={data.n} m={pool.m} iters={args.iters} (default backend: {kernels.BACKEND})")
    print(f"{'backend':<8} {'select_edge':>14} {'full run':>10}")

    results = {}
    for name, mod in avail.items():
        t_sel = best_of(lambda: mod.select_edge(mt, w), args.repeat)
        t_run, trace = full_run(data, pool, args.iters, mod)
        results[name] = (t_sel, t_run, trace)
        print(f"{name:<8} {t_sel * 1e6:>11.1f} us {t_run:>9.2f}s")

    if len(results) == 2:
        a, b = results["numpy"], results["cython"]
        print(f"speedup  {a[0] / b[0]:>13.1f}x {a[1] / b[1]:>9.1f}x")
        same = list(a[2].lines()) == list(b[2].lines())
        print(f"traces identical: {same}")
        if not same:
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
