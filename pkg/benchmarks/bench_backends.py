"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs each hot kernel on a representative workload under both
implementations and prints a table. The compiled column requires numba
(STARPREDICT_NUMBA unset or truthy at interpreter start); without it only
the fallback column is reported.

Usage: python3 benchmarks/bench_backends.py [--repeat N] [--scale F]
"""

import argparse
import time

import numpy as np

from starpredict._accel import NUMBA_ENABLED, backend_name
from starpredict.kernels import cooc, gbdt, sgns, walks


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_cooc(scale):
    rng = np.random.default_rng(1)
    n = int(40_000 * scale)
    times = np.cumsum(rng.exponential(5.0, size=n))
    owners = rng.integers(0, 800, size=n).astype(np.int64)
    delta = 60.0
    bound = cooc.pair_upper_bound(times, delta)
    u = np.empty(bound, dtype=np.int64)
    v = np.empty(bound, dtype=np.int64)
    label = f"cooc.fill_pairs ({n} visits, {bound} candidate pairs)"
    variants = {"numpy": lambda: cooc.fill_pairs_numpy(times, owners, delta, u, v)}
    if NUMBA_ENABLED:
        variants["numba"] = lambda: cooc.fill_pairs(times, owners, delta, u, v)
    return label, variants


def _random_csr(rng, n_nodes, avg_degree):
    half = []
    for i in range(n_nodes):
        nbrs = rng.choice(n_nodes, size=avg_degree, replace=False)
        half.extend((i, int(j)) for j in nbrs if int(j) != i)
    adj = sorted({(min(a, b), max(a, b)) for a, b in half})
    deg = np.zeros(n_nodes + 1, dtype=np.int64)
    for a, b in adj:
        deg[a + 1] += 1
        deg[b + 1] += 1
    indptr = np.cumsum(deg)
    indices = np.empty(indptr[-1], dtype=np.int64)
    weights = np.empty(indptr[-1], dtype=np.float64)
    cursor = indptr[:-1].copy()
    for a, b in adj:
        for src, dst in ((a, b), (b, a)):
            indices[cursor[src]] = dst
            weights[cursor[src]] = 1.0
            cursor[src] += 1
    # neighbor lists must be sorted for the in-kernel binary search
    for i in range(n_nodes):
        lo, hi = indptr[i], indptr[i + 1]
        order = np.argsort(indices[lo:hi])
        indices[lo:hi] = indices[lo:hi][order]
        weights[lo:hi] = weights[lo:hi][order]
    return indptr, indices, weights


def bench_walks(scale):
    rng = np.random.default_rng(2)
    n_nodes = int(400 * scale)
    indptr, indices, weights = _random_csr(rng, n_nodes, 8)
    n_walks = n_nodes
    starts = np.arange(n_walks, dtype=np.int64)
    seeds = np.arange(1, n_walks + 1, dtype=np.int64)
    length = 60
    label = f"walks ({n_walks} walks x {length} steps, {n_nodes} nodes)"

    def run(fn):
        out = np.full((n_walks, length), -1, dtype=np.int64)
        lengths = np.empty(n_walks, dtype=np.int64)
        fn(indptr, indices, weights, starts, seeds, 2.0, 0.5, length, out,
           lengths)

    # single-source kernel: the numpy-mode backend runs the same function
    # uncompiled, so that is what the fallback column measures
    variants = {"numpy": lambda: run(walks._run_walks)}
    if NUMBA_ENABLED:
        variants["numba"] = lambda: run(walks.run_walks)
    return label, variants


def bench_sgns(scale):
    rng = np.random.default_rng(3)
    n_nodes = 200
    n_walks = int(60 * scale)
    length = 40
    dim = 32
    walk_arr = rng.integers(0, n_nodes, size=(n_walks, length)).astype(np.int64)
    lengths = np.full(n_walks, length, dtype=np.int64)
    neg_cum = np.cumsum(rng.uniform(0.5, 2.0, size=n_nodes))
    window, negatives, epochs, lr0 = 5, 5, 1, 0.025
    pairs = sgns.count_pairs(lengths, window)
    label = f"sgns.train ({pairs} pairs, dim {dim}, {negatives} negatives)"

    def run(fn):
        W = rng.normal(0.0, 0.1, size=(n_nodes, dim))
        C = np.zeros((n_nodes, dim))
        fn(walk_arr, lengths, W, C, neg_cum, window, negatives, epochs, lr0,
           pairs, 12345)

    variants = {"numpy": lambda: run(sgns.train_numpy)}
    if NUMBA_ENABLED:
        variants["numba"] = lambda: run(sgns.train)
    return label, variants


def _tree_inputs(rng, n, d):
    X = rng.normal(0.0, 1.0, size=(n, d))
    g = rng.normal(0.0, 1.0, size=n)
    h = rng.uniform(0.1, 1.0, size=n)
    order = np.empty((d, n), dtype=np.int32)
    for f in range(d):
        order[f] = np.argsort(X[:, f], kind="stable")
    return X, g, h, order


def bench_gbdt(scale):
    rng = np.random.default_rng(4)
    n = int(20_000 * scale)
    d = 8
    X, g, h, order = _tree_inputs(rng, n, d)
    cap = 2 * n + 1
    label = f"gbdt.build_tree ({n} rows x {d} features, depth 6)"

    def run(fn):
        feat = np.full(cap, -1, dtype=np.int32)
        thr = np.zeros(cap, dtype=np.float64)
        left = np.zeros(cap, dtype=np.int32)
        right = np.zeros(cap, dtype=np.int32)
        value = np.zeros(cap, dtype=np.float64)
        row_value = np.zeros(n, dtype=np.float64)
        fn(X, g, h, order.copy(), 6, 5, feat, thr, left, right, value,
           row_value)

    variants = {"numpy": lambda: run(gbdt.build_tree_numpy)}
    if NUMBA_ENABLED:
        variants["numba"] = lambda: run(gbdt.build_tree)
    return label, variants


def bench_predict(scale):
    rng = np.random.default_rng(5)
    n = 4000
    d = 8
    X, g, h, order = _tree_inputs(rng, n, d)
    cap = 2 * n + 1
    feat = np.full(cap, -1, dtype=np.int32)
    thr = np.zeros(cap, dtype=np.float64)
    left = np.zeros(cap, dtype=np.int32)
    right = np.zeros(cap, dtype=np.int32)
    value = np.zeros(cap, dtype=np.float64)
    row_value = np.zeros(n, dtype=np.float64)
    gbdt.build_tree_numpy(X, g, h, order, 6, 5, feat, thr, left, right,
                          value, row_value)
    nq = int(200_000 * scale)
    Xq = rng.normal(0.0, 1.0, size=(nq, d))
    label = f"gbdt.predict_margin ({nq} rows, one tree)"

    def run(fn):
        out = np.zeros(nq, dtype=np.float64)
        fn(Xq, feat, thr, left, right, value, out)

    variants = {"numpy": lambda: run(gbdt.predict_margin_numpy)}
    if NUMBA_ENABLED:
        variants["numba"] = lambda: run(gbdt.predict_margin)
    return label, variants


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3,
                        help="timed repetitions per variant (best is kept)")
    parser.add_argument("--scale", type=float, default=1.0,
                        help="workload size multiplier")
    args = parser.parse_args()

    print(f"active backend: {backend_name()}")
    if not NUMBA_ENABLED:
        print("numba unavailable or disabled; timing the numpy fallback only")
    print()
    header = f"{'workload':<58} {'numba':>10} {'numpy':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for bench in (bench_cooc, bench_walks, bench_sgns, bench_gbdt,
                  bench_predict):
        label, variants = bench(args.scale)
        timings = {}
        for name, fn in variants.items():
            fn()  # warmup: first call may compile
            timings[name] = best_of(fn, args.repeat)
        numba_s = timings.get("numba")
        numpy_s = timings["numpy"]
        numba_txt = f"{numba_s:>9.4f}s" if numba_s is not None else f"{'-':>10}"
        speedup = f"{numpy_s / numba_s:>7.1f}x" if numba_s else f"{'-':>8}"
        print(f"{label:<58} {numba_txt} {numpy_s:>9.4f}s {speedup}")


if __name__ == "__main__":
    main()
