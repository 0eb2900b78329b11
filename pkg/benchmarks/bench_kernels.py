#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the transportation simplex, isotonic regression, and the projection
oracle on representative sizes and prints one table row per case.

    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from wproj._kernels import load_backend


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_transport(K, n, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.random((n, 2))
    y = rng.random((n, 2))
    C = ((x[:, None] - y[None]) ** 2).sum(-1)
    a = np.full(n, 1.0 / n)
    return _time(lambda: K.solve_transportation(a, a, C), repeats=1)


def bench_isotonic(K, n, p, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n)
    w = np.full(n, 1.0 / n)
    return _time(lambda: K.isotonic_fit(z, w, p))


def bench_oracle(K, n, iters, seed=0):
    rng = np.random.default_rng(seed)
    q = np.sort(rng.normal(size=n))
    return _time(lambda: K.descent_oracle(q, 2.0, 1.0, iters=iters), repeats=1)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true",
                    help="smaller sizes / fewer oracle iterations")
    args = ap.parse_args()

    compiled = load_backend("compiled")
    python = load_backend("python")

    transport_sizes = (100, 300) if args.quick else (100, 300, 800)
    iso_sizes = (4096, 65536)
    oracle_iters = 20_000 if args.quick else 200_000

    rows = []
    for n in transport_sizes:
        tc = bench_transport(compiled, n)
        tp = bench_transport(python, n)
        rows.append((f"transport n={n}x{n}", tc, tp))
    for n in iso_sizes:
        for p in (2.0, 1.5):
            tc = bench_isotonic(compiled, n, p)
            tp = bench_isotonic(python, n, p)
            rows.append((f"isotonic n={n} p={p}", tc, tp))
    tc = bench_oracle(compiled, 25, oracle_iters)
    tp = bench_oracle(python, 25, oracle_iters)
    rows.append((f"oracle n=25 iters={oracle_iters}", tc, tp))

    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'compiled':>10}  {'python':>10}  {'speedup':>8}")
    for name, tc, tp in rows:
        print(f"{name:<{width}}  {tc:>9.4f}s  {tp:>9.4f}s  {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
