"""Exact-split regression tree construction for the boosting loop.

Both variants implement the same presorted segment algorithm and are
engineered to produce bitwise-identical trees: cumulative gradient sums are
sequential in both (np.cumsum is a sequential scan), the gain expression is
evaluated in the same operation order, candidate selection follows the same
feature-major strict-improvement rule, and no fastmath is applied. Node G/H
totals are carried from the winning split scan (root totals accumulate over
the feature-0 sort order) so every gain sees numbers with identical rounding
provenance regardless of backend.

Trees are emitted as flat parallel arrays (feature, threshold, left, right,
value) with feature = -1 marking leaves; node ids follow creation order
(parent before children, left before right).
"""

import numpy as np

from .._accel import NUMBA_ENABLED, compile_kernel

EPS_HESS = 1e-12
MIN_GAIN = 1e-12
LEAF_CLAMP = 4.0


def _build_tree_loop(X, g, h, order, max_depth, msl,
                     feat, thr, left, right, value, row_value):
    n = X.shape[0]
    d = X.shape[1]
    cap = feat.shape[0]
    start = np.empty(cap, dtype=np.int64)
    end = np.empty(cap, dtype=np.int64)
    depth = np.empty(cap, dtype=np.int64)
    node_g = np.empty(cap, dtype=np.float64)
    node_h = np.empty(cap, dtype=np.float64)
    left_mark = np.empty(n, dtype=np.uint8)
    tmp = np.empty(n, dtype=np.int32)

    G0 = 0.0
    H0 = 0.0
    for t in range(n):
        r = order[0, t]
        G0 += g[r]
        H0 += h[r]
    start[0] = 0
    end[0] = n
    depth[0] = 0
    node_g[0] = G0
    node_h[0] = H0
    n_nodes = 1

    nd = 0
    while nd < n_nodes:
        s = start[nd]
        e = end[nd]
        cnt = e - s
        G = node_g[nd]
        H = node_h[nd]
        feat[nd] = -1
        best_gain = MIN_GAIN
        best_f = -1
        best_thr = 0.0
        best_pos = -1
        best_gl = 0.0
        best_hl = 0.0
        if depth[nd] < max_depth and cnt >= 2 * msl and n_nodes + 2 <= cap:
            hp = H if H > EPS_HESS else EPS_HESS
            parent_term = G * G / hp
            for f in range(d):
                GL = 0.0
                HL = 0.0
                for t in range(s + 1, e):
                    rp = order[f, t - 1]
                    GL += g[rp]
                    HL += h[rp]
                    x_lo = X[rp, f]
                    x_hi = X[order[f, t], f]
                    if x_hi > x_lo:
                        nl = t - s
                        nr = e - t
                        if nl >= msl and nr >= msl:
                            GR = G - GL
                            HR = H - HL
                            hl = HL if HL > EPS_HESS else EPS_HESS
                            hr = HR if HR > EPS_HESS else EPS_HESS
                            gain = 0.5 * (GL * GL / hl + GR * GR / hr
                                          - parent_term)
                            if gain > best_gain:
                                best_gain = gain
                                best_f = f
                                t_mid = 0.5 * (x_lo + x_hi)
                                if t_mid >= x_hi:
                                    t_mid = x_lo
                                best_thr = t_mid
                                best_pos = t
                                best_gl = GL
                                best_hl = HL
        if best_f < 0:
            val = G / (H if H > EPS_HESS else EPS_HESS)
            if val > LEAF_CLAMP:
                val = LEAF_CLAMP
            elif val < -LEAF_CLAMP:
                val = -LEAF_CLAMP
            value[nd] = val
            for t in range(s, e):
                row_value[order[0, t]] = val
            nd += 1
            continue
        for t in range(s, e):
            r = order[0, t]
            if X[r, best_f] <= best_thr:
                left_mark[r] = 1
            else:
                left_mark[r] = 0
        split = best_pos
        for f in range(d):
            k1 = s
            k2 = 0
            for t in range(s, e):
                r = order[f, t]
                if left_mark[r] == 1:
                    order[f, k1] = r
                    k1 += 1
                else:
                    tmp[k2] = r
                    k2 += 1
            for t in range(k2):
                order[f, k1 + t] = tmp[t]
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feat[nd] = best_f
        thr[nd] = best_thr
        left[nd] = lid
        right[nd] = rid
        value[nd] = 0.0
        start[lid] = s
        end[lid] = split
        depth[lid] = depth[nd] + 1
        node_g[lid] = best_gl
        node_h[lid] = best_hl
        start[rid] = split
        end[rid] = e
        depth[rid] = depth[nd] + 1
        node_g[rid] = G - best_gl
        node_h[rid] = H - best_hl
        nd += 1
    return n_nodes


def build_tree_numpy(X, g, h, order, max_depth, msl,
                     feat, thr, left, right, value, row_value):
    n, d = X.shape
    cap = feat.shape[0]
    start = np.empty(cap, dtype=np.int64)
    end = np.empty(cap, dtype=np.int64)
    depth = np.empty(cap, dtype=np.int64)
    node_g = np.empty(cap, dtype=np.float64)
    node_h = np.empty(cap, dtype=np.float64)

    root = order[0]
    start[0] = 0
    end[0] = n
    depth[0] = 0
    node_g[0] = float(np.cumsum(g[root])[-1])
    node_h[0] = float(np.cumsum(h[root])[-1])
    n_nodes = 1
    rows_idx = np.arange(d)[:, None]

    nd = 0
    while nd < n_nodes:
        s = int(start[nd])
        e = int(end[nd])
        cnt = e - s
        G = float(node_g[nd])
        H = float(node_h[nd])
        feat[nd] = -1
        chosen = False
        if depth[nd] < max_depth and cnt >= 2 * msl and n_nodes + 2 <= cap:
            seg = order[:, s:e]
            xmat = X[seg, rows_idx]
            GL = np.cumsum(g[seg], axis=1)[:, :-1]
            HL = np.cumsum(h[seg], axis=1)[:, :-1]
            nl = np.arange(1, cnt)
            valid = xmat[:, 1:] > xmat[:, :-1]
            if msl > 1:
                valid = valid & (nl >= msl) & (cnt - nl >= msl)
            hp = H if H > EPS_HESS else EPS_HESS
            parent_term = G * G / hp
            GR = G - GL
            HR = H - HL
            gains = 0.5 * (GL * GL / np.maximum(HL, EPS_HESS)
                           + GR * GR / np.maximum(HR, EPS_HESS)
                           - parent_term)
            gains[~valid] = -np.inf
            flat = int(np.argmax(gains))
            best_gain = float(gains.flat[flat])
            if best_gain > MIN_GAIN:
                chosen = True
                best_f = flat // (cnt - 1)
                t_off = flat % (cnt - 1)
                x_lo = float(xmat[best_f, t_off])
                x_hi = float(xmat[best_f, t_off + 1])
                t_mid = 0.5 * (x_lo + x_hi)
                if t_mid >= x_hi:
                    t_mid = x_lo
                best_thr = t_mid
                best_pos = s + t_off + 1
                best_gl = float(GL[best_f, t_off])
                best_hl = float(HL[best_f, t_off])
        if not chosen:
            val = G / (H if H > EPS_HESS else EPS_HESS)
            if val > LEAF_CLAMP:
                val = LEAF_CLAMP
            elif val < -LEAF_CLAMP:
                val = -LEAF_CLAMP
            value[nd] = val
            row_value[order[0, s:e]] = val
            nd += 1
            continue
        rows0 = order[0, s:e]
        go_left = np.zeros(n, dtype=bool)
        go_left[rows0] = X[rows0, best_f] <= best_thr
        split = best_pos
        for f in range(d):
            seg_f = order[f, s:e].copy()
            m = go_left[seg_f]
            order[f, s:split] = seg_f[m]
            order[f, split:e] = seg_f[~m]
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feat[nd] = best_f
        thr[nd] = best_thr
        left[nd] = lid
        right[nd] = rid
        value[nd] = 0.0
        start[lid] = s
        end[lid] = split
        depth[lid] = depth[nd] + 1
        node_g[lid] = best_gl
        node_h[lid] = best_hl
        start[rid] = split
        end[rid] = e
        depth[rid] = depth[nd] + 1
        node_g[rid] = G - best_gl
        node_h[rid] = H - best_hl
        nd += 1
    return n_nodes


def _predict_margin_loop(X, feat, thr, left, right, value, out):
    n = X.shape[0]
    for i in range(n):
        nd = 0
        while feat[nd] >= 0:
            if X[i, feat[nd]] <= thr[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] += value[nd]


def predict_margin_numpy(X, feat, thr, left, right, value, out):
    n = X.shape[0]
    nd = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    while True:
        inner = feat[nd] >= 0
        if not inner.any():
            break
        idx = rows[inner]
        cur = nd[inner]
        f = feat[cur]
        goes_left = X[idx, f] <= thr[cur]
        nd[idx] = np.where(goes_left, left[cur], right[cur])
    out += value[nd]


if NUMBA_ENABLED:
    build_tree = compile_kernel(_build_tree_loop)
    predict_margin = compile_kernel(_predict_margin_loop)
else:
    build_tree = build_tree_numpy
    predict_margin = predict_margin_numpy
