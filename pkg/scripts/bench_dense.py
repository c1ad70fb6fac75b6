#!/usr/bin/env python3
"""Benchmark exact dense retrieval latency on a synthetic index.

Builds an n-doc index of random unit vectors and reports p50/p90/p99/mean
wall time per k. A warm-up pass per k is excluded from the samples.
"""

import argparse

import numpy as np

from ragbench.dense import DenseIndex, dense_retrieve
from ragbench.harness import bench_retrieval


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-docs", type=int, default=10_000)
    parser.add_argument("--dim", type=int, default=128)
    parser.add_argument("--ks", default="1,10,100,600")
    parser.add_argument("--queries", type=int, default=5)
    parser.add_argument("--reps", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    matrix = rng.normal(size=(args.n_docs, args.dim))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    index = DenseIndex(ids=[f"d{i:06d}" for i in range(args.n_docs)],
                       vectors=matrix, dim=args.dim)
    queries = {f"q{i}": rng.normal(size=args.dim) for i in range(args.queries)}
    ks = [int(k) for k in args.ks.split(",")]

    report = bench_retrieval(
        lambda q, k: dense_retrieve(index, queries[q], k),
        list(queries), ks, repetitions=args.reps,
    )
    print(f"n_docs={args.n_docs} dim={args.dim} reps={args.reps}")
    print("k\tp50_ms\tp90_ms\tp99_ms\tmean_ms")
    for k in ks:
        s = report.stats[k]
        print(f"{k}\t{s['p50']*1e3:.3f}\t{s['p90']*1e3:.3f}"
              f"\t{s['p99']*1e3:.3f}\t{s['mean']*1e3:.3f}")


if __name__ == "__main__":
    main()
