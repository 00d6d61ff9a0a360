"""Compare the compiled and numpy kernel backends on full runs.

    python benchmarks/bench_kernels.py [--n 20] [--dims 8 160] [--T 1000] [--repeat 3]

Reports the median per-round compute time of DOFW and DOGD for each backend.
"""

import argparse
import time

import numpy as np

from dofw import algorithms, kernels, losses, network, sets


def bench(n, d, T, repeat):
    stream = losses.generate_ridge(n, d, T, seed=0)
    sched = network.generate_schedule(n, T, max(n - 1, 1), seed=0)
    fset = sets.simplex(d)
    rows = []
    for alg, step in ((algorithms.DOFW, algorithms.power(0.25, 0.4)), (algorithms.DOGD, algorithms.power(0.25, 0.4))):
        for backend in kernels.available_backends():
            per_round = []
            wall = []
            for _ in range(repeat):
                t0 = time.perf_counter()
                tr = algorithms.run(alg, sched, stream, step, fset, diagnostics=False, backend=backend)
                wall.append(time.perf_counter() - t0)
                per_round.append(np.median(tr.round_time_ns) / 1e3)
            rows.append((alg, backend, d, float(np.median(per_round)), float(np.median(wall))))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--dims", type=int, nargs="+", default=[8, 160])
    ap.add_argument("--T", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"backends: {', '.join(kernels.available_backends())}")
    print(f"{'algorithm':<10}{'backend':<9}{'d':>5}{'round_us':>12}{'run_s':>10}")
    results = {}
    for d in args.dims:
        for alg, backend, dd, us, wall in bench(args.n, d, args.T, args.repeat):
            results[alg, backend, dd] = us
            print(f"{alg:<10}{backend:<9}{dd:>5}{us:>12.1f}{wall:>10.3f}")
    if "cython" in kernels.available_backends():
        for (alg, backend, d), us in sorted(results.items()):
            if backend == "cython":
                print(f"speedup {alg} d={d}: {results[alg, 'python', d] / us:.1f}x")


if __name__ == "__main__":
    main()
