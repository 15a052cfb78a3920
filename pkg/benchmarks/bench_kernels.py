#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Runs each hot kernel on a representative workload under both backends and
prints per-kernel timings plus the speedup. Sizes can be scaled with
--scale for quick or thorough runs.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --scale 4 --repeats 7
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from omicsmr.kernels import available_backends


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def clump_workload(scale: int):
    n = 2000 * scale
    rng = np.random.default_rng(0)
    p = np.ascontiguousarray(10.0 ** rng.uniform(-12, 0, size=n))
    pos = np.sort(rng.integers(1, 50_000_000, size=n)).astype(np.int64)
    chrom = rng.integers(0, 4, size=n).astype(np.int64)
    base = rng.uniform(-1, 1, size=(n, n))
    r = (base + base.T) / 2.0
    np.fill_diagonal(r, 1.0)
    r2 = np.ascontiguousarray(r * r)
    rsids = np.array([f"rs{i}" for i in range(n)])
    order = np.lexsort((rsids, pos, p)).astype(np.int64)

    def run(impl):
        impl.clump_greedy(order, p, pos, chrom, r2, 1e-5, 1e-4, 0.2,
                          500_000)

    return f"clump_greedy (n={n})", run


def median_workload(scale: int):
    m = 200
    calls = 500 * scale
    rng = np.random.default_rng(1)
    thetas = [np.sort(rng.normal(0.4, 0.2, size=m)) for _ in range(calls)]
    weights = [np.ascontiguousarray(rng.uniform(0.1, 5.0, size=m))
               for _ in range(calls)]

    def run(impl):
        for theta, w in zip(thetas, weights):
            impl.weighted_median_sorted(theta, w)

    return f"weighted_median_sorted ({calls} calls, m={m})", run


def bootstrap_workload(scale: int):
    n_boot = 2000 * scale
    m = 50
    rng = np.random.default_rng(2)
    draws = np.ascontiguousarray(rng.normal(0.4, 0.2, size=(n_boot, m)))
    w = np.ascontiguousarray(rng.uniform(0.1, 5.0, size=m))

    def run(impl):
        impl.wm_bootstrap(draws, w)

    return f"wm_bootstrap (n_boot={n_boot}, m={m})", run


def chain_workload(scale: int):
    k = 12
    n_iter = 50_000 * scale
    rng = np.random.default_rng(3)
    uniforms = rng.random(n_iter)
    weights = rng.normal(0.0, 1.0, size=k)

    def score(mask: int) -> float:
        total = 0.0
        for i in range(k):
            if mask >> i & 1:
                total += weights[i] - 0.4
        return total

    def run(impl):
        impl.sss_chain(0b1, k, 1, k, uniforms, score, {}, {},
                       hood_cache={})

    return f"sss_chain ({n_iter} iterations, k={k})", run


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scale", type=int, default=1,
                        help="workload multiplier (default 1)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="take the best of this many runs (default 3)")
    args = parser.parse_args()

    backends = available_backends()
    if set(backends) != {"python", "compiled"}:
        print(f"available backends: {sorted(backends)} — need both for a "
              "comparison")
        return

    workloads = [
        clump_workload(args.scale),
        median_workload(args.scale),
        bootstrap_workload(args.scale),
        chain_workload(args.scale),
    ]

    name_w = max(len(name) for name, _ in workloads)
    print(f"{'kernel':<{name_w}}  {'python':>10}  {'compiled':>10}  "
          f"{'speedup':>8}")
    for name, run in workloads:
        times = {
            backend: _best_of(lambda impl=impl: run(impl), args.repeats)
            for backend, impl in backends.items()
        }
        speedup = times["python"] / times["compiled"]
        print(f"{name:<{name_w}}  {times['python'] * 1e3:>8.2f}ms  "
              f"{times['compiled'] * 1e3:>8.2f}ms  {speedup:>7.2f}x")


if __name__ == "__main__":
    main()
