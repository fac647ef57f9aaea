#!/usr/bin/env python3
"""Compare the numba and numpy kernel backends on representative loads.

Run: python benchmarks/bench_kernels.py [--points 20000] [--repeats 3]
The first numba call includes JIT compilation; a warmup run is timed
separately so the steady-state numbers are comparable.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from radarpc import kernels
from radarpc.kernels import numpy_impl

try:
    from radarpc.kernels import numba_impl
except Exception:
    numba_impl = None


def timeit(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--queries", type=int, default=5000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    xyz = rng.uniform(-50, 50, (args.points, 3))
    xyz[:, 2] = rng.uniform(0, 4, args.points)
    sids = rng.integers(0, 6, args.points).astype(np.int64)
    query = rng.uniform(-50, 50, (args.queries, 2))
    ref = rng.uniform(-50, 50, (args.points, 2))

    cases = {
        "validation_flags": lambda impl: impl.validation_flags(
            xyz, sids, 10.0, 1.0, 3, False),
        "nearest_neighbor": lambda impl: impl.nearest_neighbor(query, ref),
        "radius_counts": lambda impl: impl.radius_counts(xyz, 1.0),
    }

    impls = {"numpy": numpy_impl}
    if numba_impl is not None:
        impls["numba"] = numba_impl
        for case in cases.values():  # JIT warmup
            t0 = time.perf_counter()
            case(numba_impl)
            print(f"numba warmup (incl. compile): {time.perf_counter() - t0:.3f}s")
    else:
        print("numba unavailable; benchmarking numpy only")

    print(f"\n{args.points} points, {args.queries} queries, "
          f"best of {args.repeats} runs (active backend: {kernels.active_backend()})")
    print(f"{'kernel':<20} " + " ".join(f"{name:>12}" for name in impls))
    for cname, case in cases.items():
        times = {name: timeit(lambda i=impl: case(i), args.repeats)
                 for name, impl in impls.items()}
        row = f"{cname:<20} " + " ".join(f"{times[n] * 1e3:>10.2f}ms" for n in impls)
        if "numba" in times and times["numba"] > 0:
            row += f"   ({times['numpy'] / times['numba']:.1f}x)"
        print(row)

    # the two backends must agree bit for bit
    for cname, case in cases.items():
        if numba_impl is None:
            break
        a = case(numpy_impl)
        b = case(numba_impl)
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        ok = all(np.array_equal(x, y) for x, y in zip(a, b))
        print(f"backend agreement {cname}: {'OK' if ok else 'MISMATCH'}")


if __name__ == "__main__":
    main()
