"""Second-order biased random walks over a weighted CSR graph.

One source function serves both backends: compiled with numba when enabled,
run as-is otherwise. All arithmetic is int64/float64 scalar work, so the two
paths consume the MINSTD stream identically and produce identical walks.
"""

import numpy as np

from .._accel import NUMBA_ENABLED, compile_kernel


def _run_walks(indptr, indices, weights, starts, seeds, p, q, walk_length,
               out, lengths):
    n_nodes = indptr.shape[0] - 1
    max_deg = 0
    for i in range(n_nodes):
        d = indptr[i + 1] - indptr[i]
        if d > max_deg:
            max_deg = d
    cum = np.empty(max(max_deg, 1), dtype=np.float64)
    inv_p = 1.0 / p
    inv_q = 1.0 / q
    for w in range(starts.shape[0]):
        state = seeds[w]
        node = starts[w]
        out[w, 0] = node
        length = 1
        prev = -1
        for step in range(1, walk_length):
            lo = indptr[node]
            hi = indptr[node + 1]
            deg = hi - lo
            if deg == 0:
                break
            total = 0.0
            for t in range(deg):
                x = indices[lo + t]
                if prev < 0:
                    alpha = 1.0
                elif x == prev:
                    alpha = inv_p
                else:
                    # binary search: is x a neighbor of prev?
                    blo = indptr[prev]
                    bhi = indptr[prev + 1]
                    found = False
                    while blo < bhi:
                        mid = (blo + bhi) // 2
                        y = indices[mid]
                        if y == x:
                            found = True
                            break
                        if y < x:
                            blo = mid + 1
                        else:
                            bhi = mid
                    alpha = 1.0 if found else inv_q
                total += alpha * weights[lo + t]
                cum[t] = total
            state = (48271 * state) % 2147483647
            target = (state / 2147483647) * total
            idx = np.searchsorted(cum[:deg], target, side="right")
            if idx >= deg:
                idx = deg - 1
            nxt = indices[lo + idx]
            out[w, step] = nxt
            length += 1
            prev = node
            node = nxt
        lengths[w] = length


if NUMBA_ENABLED:
    run_walks = compile_kernel(_run_walks)
else:
    run_walks = _run_walks


def simulate_walks(indptr, indices, weights, starts, seeds, p, q, walk_length):
    """Run one walk per (start, seed) pair.

    Returns (walks, lengths): walks is (n_walks, walk_length) int64 padded
    with -1 past each walk's end, lengths gives the live prefix per row.
    """
    n_walks = starts.shape[0]
    out = np.full((n_walks, walk_length), -1, dtype=np.int64)
    lengths = np.empty(n_walks, dtype=np.int64)
    run_walks(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(starts, dtype=np.int64),
        np.ascontiguousarray(seeds, dtype=np.int64),
        float(p), float(q), int(walk_length), out, lengths,
    )
    return out, lengths
