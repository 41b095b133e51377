"""Gradient-boosted decision trees for binary classification, from scratch.

Logistic loss, Newton leaf values, exact midpoint splits over presorted
feature columns. No row or column subsampling. The per-round gradient and
hessian are computed here with numpy so both kernel backends (numba and the
numpy fallback) fit identical trees; the kernels do the tree construction
and traversal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .kernels import gbdt as gbdt_kernels

MODEL_FORMAT = "starpredict-gbdt"
MODEL_VERSION = 1
PROBA_CLIP = 1e-15


@dataclass(frozen=True)
class GbdtConfig:
    n_estimators: int = 100
    max_depth: int = 10
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValidationError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValidationError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1")


@dataclass(eq=False)
class Tree:
    """Flat arrays; feature == -1 marks a leaf. Node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            nd, d = stack.pop()
            if self.feature[nd] < 0:
                best = max(best, d)
            else:
                stack.append((int(self.left[nd]), d + 1))
                stack.append((int(self.right[nd]), d + 1))
        return best


@dataclass(eq=False)
class GbdtModel:
    config: GbdtConfig
    base_score: float
    n_features: int
    trees: list[Tree] = field(default_factory=list)
    loss_curve: list[float] = field(default_factory=list)

    def decision_margin(self, X: np.ndarray) -> np.ndarray:
        X = _check_matrix(X, self.n_features)
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for t in self.trees:
            gbdt_kernels.predict_margin(
                X, t.feature, t.threshold, t.left, t.right, t.value, acc)
        return self.base_score + self.config.learning_rate * acc


def _check_matrix(X, n_features=None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError("feature matrix must be 2-D")
    if not np.all(np.isfinite(X)):
        raise ValidationError("feature matrix contains NaN or infinity")
    if n_features is not None and X.shape[1] != n_features:
        raise ValidationError(
            f"expected {n_features} feature columns, got {X.shape[1]}")
    return X


def logistic_loss_point(score: float, label: float) -> float:
    p = 1.0 / (1.0 + math.exp(-score)) if score >= 0 else (
        math.exp(score) / (1.0 + math.exp(score)))
    p = min(max(p, PROBA_CLIP), 1.0 - PROBA_CLIP)
    return -(label * math.log(p) + (1.0 - label) * math.log(1.0 - p))


def logistic_grad_point(score: float, label: float) -> float:
    """d loss / d score = p - y."""
    p = 1.0 / (1.0 + math.exp(-score)) if score >= 0 else (
        math.exp(score) / (1.0 + math.exp(score)))
    return p - label


def _sigmoid_vec(scores: np.ndarray) -> np.ndarray:
    out = np.empty_like(scores)
    pos = scores >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-scores[pos]))
    e = np.exp(scores[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _logloss(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, PROBA_CLIP, 1.0 - PROBA_CLIP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def fit(X: np.ndarray, y: np.ndarray, cfg: GbdtConfig) -> GbdtModel:
    X = _check_matrix(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    n, d = X.shape
    if y.shape[0] != n:
        raise ValidationError("X and y row counts differ")
    if n < 2:
        raise ValidationError("need at least 2 training rows")
    labels = set(np.unique(y).tolist())
    if not labels <= {0.0, 1.0}:
        raise ValidationError(f"labels must be binary 0/1, got {sorted(labels)}")
    if len(labels) != 2:
        raise ValidationError("training labels are single-class")

    pos = float(y.sum())
    neg = float(n - pos)
    base = math.log(pos / neg)
    order0 = np.empty((d, n), dtype=np.int32)
    for f in range(d):
        order0[f] = np.argsort(X[:, f], kind="stable")

    cap = 2 * n + 1
    feat = np.empty(cap, dtype=np.int32)
    thr = np.empty(cap, dtype=np.float64)
    left = np.empty(cap, dtype=np.int32)
    right = np.empty(cap, dtype=np.int32)
    value = np.empty(cap, dtype=np.float64)
    row_value = np.empty(n, dtype=np.float64)

    model = GbdtModel(config=cfg, base_score=base, n_features=d)
    margins = np.full(n, base, dtype=np.float64)
    p = _sigmoid_vec(margins)
    model.loss_curve.append(_logloss(p, y))
    for _round in range(cfg.n_estimators):
        g = y - p
        h = p * (1.0 - p)
        n_nodes = gbdt_kernels.build_tree(
            X, g, h, order0.copy(), cfg.max_depth, cfg.min_samples_leaf,
            feat, thr, left, right, value, row_value)
        model.trees.append(Tree(
            feature=feat[:n_nodes].copy(),
            threshold=thr[:n_nodes].copy(),
            left=left[:n_nodes].copy(),
            right=right[:n_nodes].copy(),
            value=value[:n_nodes].copy(),
        ))
        margins += cfg.learning_rate * row_value
        p = _sigmoid_vec(margins)
        model.loss_curve.append(_logloss(p, y))
    return model


def predict_proba(model: GbdtModel, X: np.ndarray) -> np.ndarray:
    return _sigmoid_vec(model.decision_margin(X))


def save_model(model: GbdtModel, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": {
            "n_estimators": model.config.n_estimators,
            "max_depth": model.config.max_depth,
            "learning_rate": model.config.learning_rate,
            "min_samples_leaf": model.config.min_samples_leaf,
            "rng_seed": model.config.rng_seed,
        },
        "base_score": model.base_score,
        "n_features": model.n_features,
        "loss_curve": model.loss_curve,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in model.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> GbdtModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValidationError(f"not a {MODEL_FORMAT} file: {path}")
    if doc.get("version") != MODEL_VERSION:
        raise ValidationError(f"unsupported model version {doc.get('version')}")
    cfg = GbdtConfig(**doc["config"])
    model = GbdtModel(config=cfg, base_score=float(doc["base_score"]),
                      n_features=int(doc["n_features"]))
    model.loss_curve = [float(x) for x in doc.get("loss_curve", [])]
    for td in doc["trees"]:
        model.trees.append(Tree(
            feature=np.asarray(td["feature"], dtype=np.int32),
            threshold=np.asarray(td["threshold"], dtype=np.float64),
            left=np.asarray(td["left"], dtype=np.int32),
            right=np.asarray(td["right"], dtype=np.int32),
            value=np.asarray(td["value"], dtype=np.float64),
        ))
    return model
