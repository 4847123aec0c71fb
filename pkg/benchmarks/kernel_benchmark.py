#!/usr/bin/env python3
"""Compare the compiled kernels against the pure-Python fallback.

Times the all-pairs similarity reduction and one SGD epoch on synthetic
inputs of configurable size and prints a speedup table.  Run from the
repository root after installing the package:

    python benchmarks/kernel_benchmark.py
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from coupledrec.kernels import get_backends


def _make_similarity_inputs(rng, objects, attributes, domain):
    codes = rng.integers(0, domain, size=(objects, attributes)).astype(np.int32)
    tables = []
    for _ in range(attributes):
        t = rng.random((domain, domain))
        tables.append((t + t.T) / 2.0)
    return codes, tables


def _make_sgd_inputs(rng, users, items, rank, num_ratings, degree):
    uu = rng.integers(0, users, num_ratings).astype(np.int32)
    ii = rng.integers(0, items, num_ratings).astype(np.int32)
    rr = rng.uniform(1, 5, num_ratings)
    order = rng.permutation(num_ratings).astype(np.int64)

    def csr(n):
        counts = rng.integers(0, degree + 1, n)
        indptr = np.zeros(n + 1, dtype=np.int32)
        np.cumsum(counts, out=indptr[1:])
        idx = rng.integers(0, n, int(indptr[-1])).astype(np.int32)
        val = rng.uniform(0, 1, int(indptr[-1]))
        return indptr, idx, val

    return dict(
        P=rng.uniform(-0.1, 0.1, (users, rank)),
        Q=rng.uniform(-0.1, 0.1, (items, rank)),
        uu=uu,
        ii=ii,
        rr=rr,
        order=order,
        s=csr(users),
        w=csr(items),
    )


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--objects", type=int, default=800)
    parser.add_argument("--attributes", type=int, default=8)
    parser.add_argument("--domain", type=int, default=12)
    parser.add_argument("--users", type=int, default=1000)
    parser.add_argument("--items", type=int, default=1000)
    parser.add_argument("--rank", type=int, default=16)
    parser.add_argument("--ratings", type=int, default=20000)
    parser.add_argument("--degree", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = get_backends()
    if "native" not in backends:
        print("compiled extension not available; nothing to compare")

    rng = np.random.default_rng(7)
    codes, tables = _make_similarity_inputs(rng, args.objects, args.attributes, args.domain)
    sgd = _make_sgd_inputs(rng, args.users, args.items, args.rank, args.ratings, args.degree)

    print(f"{'kernel':<14} {'backend':<10} {'seconds':>10}   speedup")
    for kernel_name in ("cis_matrix", "sgd_epoch"):
        timings = {}
        for name, impl in backends.items():
            if kernel_name == "cis_matrix":
                fn = lambda: impl.cis_matrix(codes, tables)
            else:
                def fn(impl=impl):
                    P = sgd["P"].copy()
                    Q = sgd["Q"].copy()
                    impl.sgd_epoch(
                        P, Q, 3.0, sgd["uu"], sgd["ii"], sgd["rr"], sgd["order"],
                        0.01, 0.02, *sgd["s"], *sgd["w"], False,
                    )
            timings[name] = _time(fn, args.repeats)
        base = timings.get("fallback")
        for name, seconds in sorted(timings.items()):
            speedup = f"{base / seconds:6.1f}x" if base else "-"
            print(f"{kernel_name:<14} {name:<10} {seconds:>10.4f}   {speedup}")


if __name__ == "__main__":
    main()
