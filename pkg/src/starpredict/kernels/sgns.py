"""Skip-gram negative-sampling SGD over random-walk corpora.

Two implementations of the same update schedule: a scalar loop compiled with
numba, and a per-target vectorized numpy loop used as the fallback. Both
consume one shared MINSTD stream for negative draws and apply updates in the
same order, so they differ only in floating-point rounding (summation order
inside dot products), never in structure.

Update rule per (center u, context v) pair, word2vec convention:
gradient steps on C[target] happen immediately per target while the step on
W[u] accumulates across the positive target and all negatives and lands once
at the end of the pair. A drawn negative equal to v is skipped but still
consumes its RNG draw. The learning rate decays linearly with the global
count of positive pairs, floored at lr0 * 1e-4.
"""

import math

import numpy as np

from .._accel import NUMBA_ENABLED, compile_kernel

MINSTD_MOD = 2147483647
LR_FLOOR_FACTOR = 1e-4


def count_pairs(lengths: np.ndarray, window: int) -> int:
    """Positive (center, context) pairs in one pass over the walks."""
    total = 0
    for L in lengths:
        L = int(L)
        for i in range(L):
            lo = i - window if i - window > 0 else 0
            hi = i + window + 1 if i + window + 1 < L else L
            total += hi - lo - 1
    return total


def _train_loop(walks, lengths, W, C, neg_cum, window, negatives, epochs,
                lr0, total_pairs, state):
    n_nodes = W.shape[0]
    dim = W.shape[1]
    neg_total = neg_cum[n_nodes - 1]
    lr_min = lr0 * LR_FLOOR_FACTOR
    neu1e = np.empty(dim, dtype=np.float64)
    processed = 0
    for _epoch in range(epochs):
        for w in range(walks.shape[0]):
            L = lengths[w]
            for i in range(L):
                u = walks[w, i]
                jlo = i - window if i - window > 0 else 0
                jhi = i + window + 1 if i + window + 1 < L else L
                for j in range(jlo, jhi):
                    if j == i:
                        continue
                    v = walks[w, j]
                    lr = lr0 * (1.0 - processed / total_pairs)
                    if lr < lr_min:
                        lr = lr_min
                    processed += 1
                    for d in range(dim):
                        neu1e[d] = 0.0
                    score = 0.0
                    for d in range(dim):
                        score += W[u, d] * C[v, d]
                    if score > 30.0:
                        score = 30.0
                    elif score < -30.0:
                        score = -30.0
                    g = (1.0 - 1.0 / (1.0 + math.exp(-score))) * lr
                    for d in range(dim):
                        neu1e[d] += g * C[v, d]
                        C[v, d] += g * W[u, d]
                    for _k in range(negatives):
                        state = (48271 * state) % MINSTD_MOD
                        tgt = (state / MINSTD_MOD) * neg_total
                        m = np.searchsorted(neg_cum, tgt, side="right")
                        if m >= n_nodes:
                            m = n_nodes - 1
                        if m == v:
                            continue
                        score = 0.0
                        for d in range(dim):
                            score += W[u, d] * C[m, d]
                        if score > 30.0:
                            score = 30.0
                        elif score < -30.0:
                            score = -30.0
                        g = (0.0 - 1.0 / (1.0 + math.exp(-score))) * lr
                        for d in range(dim):
                            neu1e[d] += g * C[m, d]
                            C[m, d] += g * W[u, d]
                    for d in range(dim):
                        W[u, d] += neu1e[d]
    return state


def train_numpy(walks, lengths, W, C, neg_cum, window, negatives, epochs,
                lr0, total_pairs, state):
    n_nodes = W.shape[0]
    neg_total = float(neg_cum[n_nodes - 1])
    lr_min = lr0 * LR_FLOOR_FACTOR
    state = int(state)
    processed = 0
    for _epoch in range(epochs):
        for w in range(walks.shape[0]):
            L = int(lengths[w])
            for i in range(L):
                u = int(walks[w, i])
                jlo = i - window if i - window > 0 else 0
                jhi = i + window + 1 if i + window + 1 < L else L
                wu = W[u]
                for j in range(jlo, jhi):
                    if j == i:
                        continue
                    v = int(walks[w, j])
                    lr = lr0 * (1.0 - processed / total_pairs)
                    if lr < lr_min:
                        lr = lr_min
                    processed += 1
                    cv = C[v]
                    score = float(wu @ cv)
                    if score > 30.0:
                        score = 30.0
                    elif score < -30.0:
                        score = -30.0
                    g = (1.0 - 1.0 / (1.0 + math.exp(-score))) * lr
                    neu1e = g * cv
                    cv += g * wu
                    for _k in range(negatives):
                        state = (48271 * state) % MINSTD_MOD
                        tgt = (state / MINSTD_MOD) * neg_total
                        m = int(np.searchsorted(neg_cum, tgt, side="right"))
                        if m >= n_nodes:
                            m = n_nodes - 1
                        if m == v:
                            continue
                        cm = C[m]
                        score = float(wu @ cm)
                        if score > 30.0:
                            score = 30.0
                        elif score < -30.0:
                            score = -30.0
                        g = (0.0 - 1.0 / (1.0 + math.exp(-score))) * lr
                        neu1e += g * cm
                        cm += g * wu
                    wu += neu1e
    return state


if NUMBA_ENABLED:
    train = compile_kernel(_train_loop, fastmath=True)
else:
    train = train_numpy
