"""Benchmark the PLSR engine: sparse-aware vs densified inputs, plus the
self-mapping upper bounds at the published dataset scales.

Run: python benchmarks/bench_plsr.py [--full]

The fitting engine keeps deflation implicit (pristine matrix plus a
rank-a correction), so sparse inputs never densify. This script shows
what that buys at the scale of the large categorical norms, and checks
the upper-bound runtimes against the budgets the acceptance suite
asserts (2 min / 15 min / 1 min).
"""

from __future__ import annotations

import argparse
import time

import numpy as np
import scipy.sparse as sp

from normmap._util import rng_for
from normmap.ablation import upper_bound
from normmap.dataset import NormMatrix
from normmap.evaluation import ModelSpec, make_fold_plan
from normmap.plsr import fit_plsr


def synth_categorical_matrix(n, m, lo, hi, seed):
    """Sparse norm-shaped matrix; weighted sampling via exponential keys."""
    rng = rng_for(seed, 1)
    weights = 1.0 / np.arange(1, m + 1) ** 0.9
    indptr = [0]
    indices = []
    data = []
    for _ in range(n):
        count = int(rng.integers(lo, hi + 1))
        keys = rng.exponential(size=m) / weights
        cols = np.sort(np.argpartition(keys, count)[:count])
        indices.append(cols)
        data.append(rng.integers(1, 31, size=count).astype(float))
        indptr.append(indptr[-1] + count)
    values = sp.csr_matrix(
        (np.concatenate(data), np.concatenate(indices), np.array(indptr)),
        shape=(n, m))
    labels = (tuple(f"c{i:05d}" for i in range(n)),
              tuple(f"f{j:05d}" for j in range(m)))
    return NormMatrix(values, labels[0], labels[1], categorical=True)


def bench_fit(Y, k, label):
    sparse_t = time.perf_counter()
    fit_plsr(Y.values, Y.values, k=k)
    sparse_t = time.perf_counter() - sparse_t
    dense = Y.dense()
    dense_t = time.perf_counter()
    fit_plsr(dense, dense, k=k)
    dense_t = time.perf_counter() - dense_t
    print(f"{label}: sparse {sparse_t:6.2f}s   densified {dense_t:6.2f}s   "
          f"speedup x{dense_t / sparse_t:.1f}")


def bench_upper(Y, k, folds, budget, label):
    plan = make_fold_plan(Y.concept_index, folds, seed=13)
    start = time.perf_counter()
    report = upper_bound(Y, ModelSpec(method="plsr", k=k), plan)
    elapsed = time.perf_counter() - start
    headline = ("f1_at_10" if "f1_at_10" in report.aggregate else "rho")
    print(f"{label}: {headline}={report.aggregate[headline]:.3f}   "
          f"{elapsed:6.1f}s   (budget {budget}s)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--full", action="store_true",
                        help="include the Buchanan-scale upper bound")
    args = parser.parse_args()

    print("== single fit: sparse engine vs densified input ==")
    mcrae_like = synth_categorical_matrix(541, 2526, 6, 26, seed=0)
    bench_fit(mcrae_like, k=25, label="McRae-scale fit (541x2526, k=25)")

    print("\n== 10-fold self-mapping upper bounds vs acceptance budgets ==")
    bench_upper(mcrae_like, 25, 10, 120, "McRae-scale upper")
    rng = rng_for(0, 2)
    binder_like = NormMatrix(rng.random((534, 62)),
                             tuple(f"c{i:04d}" for i in range(534)),
                             tuple(f"f{j:03d}" for j in range(62)),
                             categorical=False)
    bench_upper(binder_like, 20, 10, 60, "Binder-scale upper")
    if args.full:
        buchanan_like = synth_categorical_matrix(4437, 11443, 5, 30, seed=1)
        bench_upper(buchanan_like, 80, 10, 900, "Buchanan-scale upper")
    else:
        print("Buchanan-scale upper skipped (pass --full; takes ~4 min)")


if __name__ == "__main__":
    main()
