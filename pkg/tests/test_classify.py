import math

import numpy as np
import pytest

from oracles import exhaustive_best_split
from starpredict.classify import (
    GbdtConfig,
    GbdtModel,
    fit,
    load_model,
    logistic_grad_point,
    logistic_loss_point,
    predict_proba,
    save_model,
)
from starpredict.errors import ValidationError
from starpredict.kernels import gbdt as gbdt_kernels


def _root_split(X, g, h, max_depth=1, msl=1):
    """Run the tree kernel once and return its root decision."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    order = np.empty((d, n), dtype=np.int32)
    for f in range(d):
        order[f] = np.argsort(X[:, f], kind="stable")
    cap = 2 * n + 1
    feat = np.empty(cap, dtype=np.int32)
    thr = np.empty(cap, dtype=np.float64)
    left = np.empty(cap, dtype=np.int32)
    right = np.empty(cap, dtype=np.int32)
    value = np.empty(cap, dtype=np.float64)
    row_value = np.empty(n, dtype=np.float64)
    gbdt_kernels.build_tree(X, g.astype(np.float64), h.astype(np.float64),
                            order, max_depth, msl,
                            feat, thr, left, right, value, row_value)
    if feat[0] < 0:
        return None
    return int(feat[0]), float(thr[0])


def _dyadic(rng, size, lo=-128, hi=128, scale=64.0):
    return rng.integers(lo, hi, size=size).astype(np.float64) / scale


def test_config_validation():
    with pytest.raises(ValidationError):
        GbdtConfig(n_estimators=0)
    with pytest.raises(ValidationError):
        GbdtConfig(max_depth=0)
    with pytest.raises(ValidationError):
        GbdtConfig(learning_rate=0.0)
    with pytest.raises(ValidationError):
        GbdtConfig(learning_rate=1.5)
    with pytest.raises(ValidationError):
        GbdtConfig(min_samples_leaf=0)
    cfg = GbdtConfig()
    assert (cfg.n_estimators, cfg.max_depth, cfg.learning_rate) == (100, 10, 0.1)


def test_fit_input_validation():
    X = np.array([[0.0], [1.0]])
    with pytest.raises(ValidationError, match="single-class"):
        fit(X, np.array([1.0, 1.0]), GbdtConfig())
    with pytest.raises(ValidationError, match="binary"):
        fit(X, np.array([0.0, 2.0]), GbdtConfig())
    with pytest.raises(ValidationError, match="NaN"):
        fit(np.array([[np.nan], [1.0]]), np.array([0.0, 1.0]), GbdtConfig())
    with pytest.raises(ValidationError):
        fit(X, np.array([0.0, 1.0, 1.0]), GbdtConfig())
    with pytest.raises(ValidationError):
        fit(X[:1], np.array([1.0]), GbdtConfig())


def test_base_score_is_log_odds():
    X = np.arange(10.0).reshape(-1, 1)
    y = np.array([0, 0, 0, 0, 0, 0, 1, 1, 1, 1], dtype=float)
    model = fit(X, y, GbdtConfig(n_estimators=1))
    assert model.base_score == pytest.approx(math.log(4 / 6), abs=1e-12)


def test_separable_toy_reaches_perfect_accuracy():
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.uniform(-2.0, -0.5, 20), rng.uniform(0.5, 2.0, 20)])
    y = (x > 0).astype(float)
    X = x.reshape(-1, 1)
    model = fit(X, y, GbdtConfig(n_estimators=10, max_depth=1))
    p = predict_proba(model, X)
    assert np.all((p > 0.5) == (y == 1.0))
    f0, t0 = int(model.trees[0].feature[0]), float(model.trees[0].threshold[0])
    assert f0 == 0
    assert x[x < 0].max() <= t0 < x[x > 0].min()


def test_predict_without_trees_is_prior():
    cfg = GbdtConfig()
    model = GbdtModel(config=cfg, base_score=0.3, n_features=2)
    p = predict_proba(model, np.zeros((4, 2)))
    assert np.allclose(p, 1.0 / (1.0 + math.exp(-0.3)), atol=1e-15)


def test_predict_dimension_mismatch():
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    model = fit(X, np.array([0.0, 1.0]), GbdtConfig(n_estimators=2))
    with pytest.raises(ValidationError, match="columns"):
        predict_proba(model, np.zeros((2, 3)))


def test_duplicate_rows_same_probability():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 4))
    y = (X[:, 0] + 0.3 * rng.normal(size=30) > 0).astype(float)
    model = fit(X, y, GbdtConfig(n_estimators=5, max_depth=3))
    Xq = np.vstack([X[3], X[3]])
    p = predict_proba(model, Xq)
    assert p[0] == p[1]


def test_logistic_gradient_matches_finite_difference():
    rng = np.random.default_rng(2)
    for _ in range(40):
        s = float(rng.uniform(-6, 6))
        lab = float(rng.integers(0, 2))
        eps = 1e-6
        num = (logistic_loss_point(s + eps, lab)
               - logistic_loss_point(s - eps, lab)) / (2 * eps)
        assert abs(logistic_grad_point(s, lab) - num) < 1e-6


def test_loss_curve_non_increasing():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 5))
    w = rng.normal(size=5)
    y = (X @ w + 0.5 * rng.normal(size=80) > 0).astype(float)
    model = fit(X, y, GbdtConfig(n_estimators=30, max_depth=3))
    curve = np.asarray(model.loss_curve)
    assert curve.shape[0] == 31
    assert np.all(np.diff(curve) <= 1e-12)


def test_max_depth_respected():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(100, 3))
    y = (rng.random(100) < 0.5).astype(float)
    for depth in (1, 2, 4):
        model = fit(X, y, GbdtConfig(n_estimators=3, max_depth=depth))
        assert max(t.depth() for t in model.trees) <= depth


def test_min_samples_leaf_respected():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(40, 2))
    y = (rng.random(40) < 0.5).astype(float)
    model = fit(X, y, GbdtConfig(n_estimators=2, max_depth=6,
                                 min_samples_leaf=8))
    for tree in model.trees:
        counts = _leaf_counts(tree, X)
        assert min(counts) >= 8


def _leaf_counts(tree, X):
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        inner = tree.feature[node] >= 0
        if not inner.any():
            break
        f = tree.feature[node[inner]]
        t = tree.threshold[node[inner]]
        goes_left = X[inner, f] <= t
        node[np.flatnonzero(inner)] = np.where(
            goes_left, tree.left[node[inner]], tree.right[node[inner]])
    _, counts = np.unique(node, return_counts=True)
    return counts


def test_leaf_values_clamped():
    # near-zero hessian yields a huge Newton step; leaves clamp at +/-4
    X = np.ascontiguousarray([[0.0], [1.0]])
    g = np.array([-1.0, 1.0])
    h = np.array([0.01, 0.01])
    n = 2
    order = np.zeros((1, n), dtype=np.int32)
    order[0] = [0, 1]
    cap = 2 * n + 1
    feat = np.empty(cap, dtype=np.int32)
    thr = np.empty(cap, dtype=np.float64)
    left = np.empty(cap, dtype=np.int32)
    right = np.empty(cap, dtype=np.int32)
    value = np.empty(cap, dtype=np.float64)
    row_value = np.empty(n, dtype=np.float64)
    gbdt_kernels.build_tree(X, g, h, order, 1, 1,
                            feat, thr, left, right, value, row_value)
    leaves = value[1:3]
    assert sorted(leaves.tolist()) == [-4.0, 4.0]
    assert sorted(row_value.tolist()) == [-4.0, 4.0]


def test_split_finder_matches_exhaustive_oracle():
    rng = np.random.default_rng(6)
    for trial in range(60):
        n = int(rng.integers(5, 60))
        d = int(rng.integers(1, 5))
        # few distinct values force duplicates and exact dyadic sums
        X = rng.integers(0, 6, size=(n, d)).astype(np.float64) / 4.0
        g = _dyadic(rng, n)
        h = np.abs(_dyadic(rng, n)) + 1.0 / 64.0
        msl = int(rng.integers(1, 4))
        got = _root_split(X, g, h, msl=msl)
        want = exhaustive_best_split(X, g, h, min_samples_leaf=msl)
        if want is None:
            assert got is None, f"trial {trial}"
        else:
            assert got is not None, f"trial {trial}"
            assert got[0] == want[1] and got[1] == want[2], f"trial {trial}"


def test_tie_break_prefers_lowest_feature():
    # two identical columns: identical best gains, feature 0 must win
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    g = np.array([-0.5, -0.5, 0.5, 0.5])
    h = np.full(4, 0.25)
    got = _root_split(X, g, h)
    assert got is not None and got[0] == 0


def test_column_permutation_invariance():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(60, 4))
    y = (X[:, 1] - X[:, 2] > 0).astype(float)
    cfg = GbdtConfig(n_estimators=8, max_depth=3)
    p_orig = predict_proba(fit(X, y, cfg), X)
    perm = np.array([2, 0, 3, 1])
    p_perm = predict_proba(fit(X[:, perm], y, cfg), X[:, perm])
    assert np.allclose(p_orig, p_perm, atol=1e-12)


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(50, 3))
    y = (X[:, 0] > 0.2).astype(float)
    model = fit(X, y, GbdtConfig(n_estimators=6, max_depth=4))
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == model.config
    assert loaded.base_score == model.base_score
    assert np.array_equal(predict_proba(loaded, X), predict_proba(model, X))
    (tmp_path / "junk.json").write_text('{"format": "other"}')
    with pytest.raises(ValidationError):
        load_model(tmp_path / "junk.json")


def test_fit_deterministic():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(40, 3))
    y = (rng.random(40) < 0.4).astype(float)
    cfg = GbdtConfig(n_estimators=4, max_depth=3)
    p1 = predict_proba(fit(X, y, cfg), X)
    p2 = predict_proba(fit(X, y, cfg), X)
    assert np.array_equal(p1, p2)
