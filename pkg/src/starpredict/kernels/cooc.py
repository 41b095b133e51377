"""Pair counting for within-delta co-occurrences on a sorted visit timeline.

Both variants enumerate every ordered visit pair (i, j), i < j, with
``times[j] <= times[i] + delta`` and different owners, emitting the owner
pair with the smaller id first. Aggregation into edge weights happens in
:mod:`starpredict.cograph`.
"""

import numpy as np

from .._accel import NUMBA_ENABLED, compile_kernel


def pair_upper_bound(times: np.ndarray, delta: float) -> int:
    """Number of within-delta visit pairs, owners ignored."""
    ends = np.searchsorted(times, times + delta, side="right")
    return int((ends - np.arange(times.shape[0]) - 1).sum())


def _fill_pairs_loop(times, owners, delta, u_out, v_out):
    n = times.shape[0]
    k = 0
    for i in range(n):
        limit = times[i] + delta
        j = i + 1
        while j < n and times[j] <= limit:
            if owners[j] != owners[i]:
                a = owners[i]
                b = owners[j]
                if a > b:
                    a, b = b, a
                u_out[k] = a
                v_out[k] = b
                k += 1
            j += 1
    return k


def fill_pairs_numpy(times, owners, delta, u_out, v_out):
    n = times.shape[0]
    ends = np.searchsorted(times, times + delta, side="right")
    counts = ends - np.arange(n) - 1
    total = int(counts.sum())
    if total == 0:
        return 0
    i_idx = np.repeat(np.arange(n), counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    j_idx = i_idx + 1 + offsets
    keep = owners[i_idx] != owners[j_idx]
    a = owners[i_idx[keep]]
    b = owners[j_idx[keep]]
    k = a.shape[0]
    u_out[:k] = np.minimum(a, b)
    v_out[:k] = np.maximum(a, b)
    return k


if NUMBA_ENABLED:
    fill_pairs = compile_kernel(_fill_pairs_loop)
else:
    fill_pairs = fill_pairs_numpy


def count_pairs(times: np.ndarray, owners: np.ndarray, delta: float):
    """Return (u, v) owner arrays, one entry per within-delta visit pair."""
    bound = pair_upper_bound(times, delta)
    u = np.empty(bound, dtype=np.int64)
    v = np.empty(bound, dtype=np.int64)
    k = fill_pairs(times, owners, float(delta), u, v)
    return u[:k], v[:k]
