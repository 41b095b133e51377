"""Training-set balancing: SMOTE plus random under/over-sampling baselines.

All three methods equalize class counts exactly. They are applied by the
evaluation harness to training folds only, after standardization, so the
k-NN search here sees comparable column scales. Synthesized rows are convex
combinations x + (x' - x) * w with w uniform in [0, 1] and x' one of x's k
nearest minority neighbors (Euclidean, self excluded).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .seeds import rng_for


class AugmentMethod(enum.Enum):
    NONE = "none"
    RU = "ru"
    RO = "ro"
    SMOTE = "smote"


@dataclass(frozen=True)
class AugmentConfig:
    method: AugmentMethod = AugmentMethod.SMOTE
    k_neighbors: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValidationError("k_neighbors must be >= 1")


def nearest_neighbor_table(rows: np.ndarray, k: int) -> np.ndarray:
    """(m, k) indices of each row's k nearest other rows, closest first;
    distance ties resolve to the lower row index."""
    m = rows.shape[0]
    d2 = ((rows[:, None, :] - rows[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k]


def smote(minority_rows: np.ndarray, target_count: int, k: int, seed: int) -> np.ndarray:
    """Return target_count - len(minority_rows) synthesized rows."""
    rows = np.asarray(minority_rows, dtype=np.float64)
    m = rows.shape[0]
    if m < 2:
        raise ValidationError(f"SMOTE needs >= 2 minority rows, got {m}")
    if target_count < m:
        raise ValidationError("target_count below current minority count")
    k_eff = k
    if k_eff > m - 1:
        k_eff = m - 1
        warnings.warn(
            f"k_neighbors={k} clipped to {k_eff} (minority count {m})",
            stacklevel=2)
    need = target_count - m
    out = np.empty((need, rows.shape[1]), dtype=np.float64)
    if need == 0:
        return out
    neigh = nearest_neighbor_table(rows, k_eff)
    rng = rng_for("smote", seed)
    perm = rng.permutation(m)
    for i in range(need):
        xi = int(perm[i % m])
        nj = int(neigh[xi, rng.integers(0, k_eff)])
        w = rng.uniform()
        out[i] = rows[xi] + (rows[nj] - rows[xi]) * w
    return out


def random_undersample(majority_rows: np.ndarray, target_count: int, seed: int) -> np.ndarray:
    rows = np.asarray(majority_rows)
    if target_count > rows.shape[0]:
        raise ValidationError("undersample target exceeds majority count")
    rng = rng_for("undersample", seed)
    keep = rng.choice(rows.shape[0], size=target_count, replace=False)
    keep.sort()
    return rows[keep]


def random_oversample(minority_rows: np.ndarray, target_count: int, seed: int) -> np.ndarray:
    """Originals first, then uniform resamples up to target_count rows."""
    rows = np.asarray(minority_rows)
    m = rows.shape[0]
    if m < 1:
        raise ValidationError("oversample needs at least one minority row")
    if target_count < m:
        raise ValidationError("target_count below current minority count")
    rng = rng_for("oversample", seed)
    extra = rng.integers(0, m, size=target_count - m)
    return np.concatenate([rows, rows[extra]], axis=0)


def balance_training_set(X: np.ndarray, y: np.ndarray,
                         cfg: AugmentConfig) -> tuple[np.ndarray, np.ndarray]:
    """Equalize class counts in (X, y) per cfg.method.

    RU keeps rows in their original order; RO and SMOTE append new minority
    rows after the originals. NONE returns the inputs untouched.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] != y.shape[0]:
        raise ValidationError("X and y row counts differ")
    classes, counts = np.unique(y, return_counts=True)
    if classes.shape[0] != 2:
        raise ValidationError(f"need exactly 2 classes, got {classes.tolist()}")
    if cfg.method is AugmentMethod.NONE or counts[0] == counts[1]:
        return X, y
    mnr = classes[np.argmin(counts)]
    mjr = classes[np.argmax(counts)]
    min_mask = y == mnr
    n_min = int(min_mask.sum())
    n_maj = int(y.shape[0] - n_min)

    if cfg.method is AugmentMethod.RU:
        maj_idx = np.nonzero(~min_mask)[0]
        picked = random_undersample(maj_idx, n_min, cfg.rng_seed)
        keep = np.zeros(y.shape[0], dtype=bool)
        keep[min_mask] = True
        keep[picked] = True
        return X[keep], y[keep]

    if cfg.method is AugmentMethod.RO:
        resampled = random_oversample(X[min_mask], n_maj, cfg.rng_seed)
        new_rows = resampled[n_min:]
    elif cfg.method is AugmentMethod.SMOTE:
        new_rows = smote(X[min_mask], n_maj, cfg.k_neighbors, cfg.rng_seed)
    else:  # pragma: no cover
        raise ValidationError(f"unknown method {cfg.method}")
    X_out = np.concatenate([X, new_rows], axis=0)
    y_out = np.concatenate([y, np.full(new_rows.shape[0], mnr, dtype=y.dtype)])
    return X_out, y_out
