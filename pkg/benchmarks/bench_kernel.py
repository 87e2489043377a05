#!/usr/bin/env python3
"""Benchmark the compiled event loop against the pure-Python fallback.

Both backends consume identical RNG streams, so the paths are bitwise
identical; only the wall time differs.  Run: python benchmarks/bench_kernel.py
"""

import time

import numpy as np

from sktlab.params import ModelParams
from sktlab.walkers import CountsState, simulate_path


def run(backend, M, N, T, seed):
    state = CountsState(N, np.full(M, N), np.full(M, N))
    params = ModelParams(1.0, 1.0, 0.1, 0.1)
    sched = np.linspace(0.0, T, 17)
    t0 = time.perf_counter()
    path = simulate_path(state, params, sched, seed=seed, backend=backend)
    dt = time.perf_counter() - t0
    return path, dt


def main():
    cases = [(8, 200, 0.1), (8, 2000, 0.05), (32, 500, 0.02)]
    print(f"{'case':>18} {'events':>10} {'compiled':>12} {'python':>12} {'speedup':>8}")
    for M, N, T in cases:
        pc, tc = run("compiled", M, N, T, seed=(2026, M, N))
        pp, tp = run("python", M, N, T, seed=(2026, M, N))
        assert pc.event_count == pp.event_count
        assert np.array_equal(pc.n_u, pp.n_u) and np.array_equal(pc.gu_int, pp.gu_int), \
            "backends diverged"
        ev = pc.event_count
        print(f"M={M:<3} N={N:<6} T={T:<5} {ev:>9} {tc:>10.3f}s {tp:>10.3f}s {tp / tc:>7.1f}x"
              f"   ({1e9 * tc / ev:.0f} vs {1e9 * tp / ev:.0f} ns/event)")


if __name__ == "__main__":
    main()
