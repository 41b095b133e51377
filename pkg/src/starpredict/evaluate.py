"""Metrics, feature screening, cross-validation, ablations, weekly sweep.

AUC is the exact rank statistic P(score_pos > score_neg) + 0.5 P(tie).
ACC-STAR is recall on the positive (at-risk) class. The ANOVA screen keeps
statistical features whose two-group F-test p-value clears the significance
level, recomputed on every training fold so test labels never leak into
feature selection. Augmentation runs after standardization, on training
rows only.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import betainc

from . import classify, featurize
from .augment import AugmentConfig, AugmentMethod, balance_training_set
from .classify import GbdtConfig
from .errors import MetricUndefinedError, ValidationError
from .ingest import CohortBundle
from .model import FeatureTable, StudentId
from .seeds import derive_seed, rng_for

DEFAULT_THRESHOLD = 0.5
DEFAULT_SIGNIFICANCE = 0.05

ABLATION_NAMES = ("SF", "DA", "DA-Reg", "DA-SoH", "EPARS")


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    sx = x[order]
    ranks = np.empty(x.shape[0], dtype=np.float64)
    i = 0
    n = x.shape[0]
    while i < n:
        j = i
        while j + 1 < n and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape[0] != labels.shape[0]:
        raise ValidationError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(labels.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("AUC needs both classes present")
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[pos].sum())
    numerator = rank_sum - n_pos * (n_pos + 1) / 2.0
    return numerator / (n_pos * n_neg)


def acc_star(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Recall on the positive class: TP / (TP + FN)."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape[0] != labels.shape[0]:
        raise ValidationError("predictions and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise MetricUndefinedError("ACC-STAR needs at least one positive")
    tp = int((predictions[pos] == 1).sum())
    return tp / n_pos


def anova_f(group_a: Sequence[float], group_b: Sequence[float]) -> tuple[float, float]:
    """One-way two-group ANOVA: (F, upper-tail p).

    Zero between-group variance gives (0, 1). Zero within-group variance
    with distinct means gives (inf, 0).
    """
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    na, nb = a.shape[0], b.shape[0]
    if na < 2 or nb < 2:
        raise ValidationError("each ANOVA group needs >= 2 samples")
    n = na + nb
    ma = float(a.mean())
    mb = float(b.mean())
    m = (a.sum() + b.sum()) / n
    ssb = na * (ma - m) ** 2 + nb * (mb - m) ** 2
    ssw = float(((a - ma) ** 2).sum() + ((b - mb) ** 2).sum())
    df_b = 1
    df_w = n - 2
    if ssb == 0.0:
        return 0.0, 1.0
    if ssw == 0.0:
        return math.inf, 0.0
    f = (ssb / df_b) / (ssw / df_w)
    p = float(betainc(df_w / 2.0, df_b / 2.0, df_w / (df_w + df_b * f)))
    return f, p


def screen_columns(X: np.ndarray, y: np.ndarray,
                   significance: float = DEFAULT_SIGNIFICANCE) -> np.ndarray:
    """Column mask: True where the two-group ANOVA p-value < significance.

    Columns are screened independently; groups with fewer than two members
    make every p undefined, returning an all-False mask (the caller falls
    back to the full block)."""
    y = np.asarray(y)
    mask = np.zeros(X.shape[1], dtype=bool)
    pos = y == 1
    if int(pos.sum()) < 2 or int((~pos).sum()) < 2:
        return mask
    for j in range(X.shape[1]):
        _f, p = anova_f(X[pos, j], X[~pos, j])
        mask[j] = p < significance
    return mask


@dataclass(frozen=True)
class FoldPlan:
    """Stratified fold assignments, one map per repeat."""

    n_folds: int
    n_repeats: int
    rng_seed: int
    assignments: tuple[dict[StudentId, int], ...]

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValidationError("cross-validation needs n_folds >= 2")
        if self.n_repeats < 1:
            raise ValidationError("n_repeats must be >= 1")
        if len(self.assignments) != self.n_repeats:
            raise ValidationError("one assignment map per repeat required")

    def fold_vector(self, students: Sequence[StudentId], repeat: int) -> np.ndarray:
        amap = self.assignments[repeat]
        return np.array([amap[s] for s in students], dtype=np.int64)


def plan_folds(star_by_student: Mapping[StudentId, bool], n_folds: int,
               n_repeats: int, rng_seed: int) -> FoldPlan:
    """Deal each class round-robin after a seeded shuffle, so every fold's
    positive count is within one of the proportional share."""
    students = sorted(star_by_student)
    if len(students) < n_folds:
        raise ValidationError("fewer students than folds")
    assignments = []
    for r in range(n_repeats):
        rng = rng_for("folds", rng_seed, r)
        amap: dict[StudentId, int] = {}
        for cls in (False, True):
            members = [s for s in students if bool(star_by_student[s]) == cls]
            for pos, mi in enumerate(rng.permutation(len(members))):
                amap[members[mi]] = pos % n_folds
        assignments.append(amap)
    return FoldPlan(n_folds=n_folds, n_repeats=n_repeats, rng_seed=rng_seed,
                    assignments=tuple(assignments))


@dataclass(frozen=True)
class AblationSpec:
    name: str
    blocks: tuple[str, ...]
    augment: bool

    def __post_init__(self):
        if "statistical" not in self.blocks:
            raise ValidationError("every ablation keeps the statistical block")


ABLATIONS: dict[str, AblationSpec] = {
    "SF": AblationSpec("SF", ("statistical",), augment=False),
    "DA": AblationSpec("DA", ("statistical",), augment=True),
    "DA-Reg": AblationSpec("DA-Reg", ("statistical", "regularity"), augment=True),
    "DA-SoH": AblationSpec("DA-SoH", ("statistical", "embedding"), augment=True),
    "EPARS": AblationSpec(
        "EPARS", ("statistical", "regularity", "embedding"), augment=True),
}


@dataclass(frozen=True)
class FoldOutcome:
    repeat: int
    fold: int
    auc: float
    acc_star: float


@dataclass(frozen=True)
class SkippedFold:
    repeat: int
    fold: int
    reason: str


@dataclass(eq=False)
class MetricReport:
    ablation: str
    week: int
    outcomes: list[FoldOutcome] = field(default_factory=list)
    skipped: list[SkippedFold] = field(default_factory=list)

    def _values(self, attr: str) -> np.ndarray:
        return np.array([getattr(o, attr) for o in self.outcomes], dtype=np.float64)

    @property
    def auc_mean(self) -> float:
        v = self._values("auc")
        return float(v.mean()) if v.shape[0] else math.nan

    @property
    def auc_sd(self) -> float:
        v = self._values("auc")
        return float(v.std(ddof=1)) if v.shape[0] > 1 else 0.0

    @property
    def acc_star_mean(self) -> float:
        v = self._values("acc_star")
        return float(v.mean()) if v.shape[0] else math.nan

    @property
    def acc_star_sd(self) -> float:
        v = self._values("acc_star")
        return float(v.std(ddof=1)) if v.shape[0] > 1 else 0.0


@dataclass(frozen=True)
class EvalSettings:
    features: featurize.FeatureConfig = featurize.FeatureConfig()
    augment: AugmentConfig = AugmentConfig()
    gbdt: GbdtConfig = GbdtConfig()
    threshold: float = DEFAULT_THRESHOLD
    significance: float = DEFAULT_SIGNIFICANCE

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValidationError("threshold must be in (0, 1)")
        if not 0 < self.significance < 1:
            raise ValidationError("significance must be in (0, 1)")


class Standardizer:
    """Per-column zero-mean unit-variance transform fit on training rows;
    constant columns pass through unscaled."""

    def __init__(self, X: np.ndarray):
        self.mean = X.mean(axis=0)
        sd = X.std(axis=0)
        sd[sd == 0.0] = 1.0
        self.sd = sd

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.sd


def select_columns(features: FeatureTable, spec: AblationSpec,
                   y_train: np.ndarray, train_mask: np.ndarray,
                   significance: float) -> np.ndarray:
    """Column indices for an ablation. The statistical block is screened by
    ANOVA on training rows; if nothing survives, the whole block stays
    (a fold cannot run on zero features)."""
    stat_cols = features.block_columns("statistical")
    X_stat = features.matrix[np.ix_(train_mask, stat_cols)]
    mask = screen_columns(X_stat, y_train, significance)
    if not mask.any():
        mask[:] = True
    cols = [stat_cols[mask]]
    for name in spec.blocks:
        if name != "statistical":
            cols.append(features.block_columns(name))
    return np.concatenate(cols)


def run_ablation(bundle: CohortBundle, spec: AblationSpec, plan: FoldPlan,
                 cutoff_week: int, settings: EvalSettings,
                 features: FeatureTable | None = None) -> MetricReport:
    """Cross-validated metrics for one ablation at one cutoff week.

    `features` may be passed in to share one label-free table across
    ablations; otherwise it is assembled here.
    """
    if features is None:
        features = featurize.assemble_features(bundle, cutoff_week,
                                               settings.features)
    students = features.students
    if students != bundle.label_students:
        raise ValidationError("feature table does not cover the labeled roster")
    y = bundle.star_vector(students).astype(np.int64)
    report = MetricReport(ablation=spec.name, week=cutoff_week)

    for r in range(plan.n_repeats):
        fold_of = plan.fold_vector(students, r)
        for f in range(plan.n_folds):
            test_mask = fold_of == f
            train_mask = ~test_mask
            y_tr = y[train_mask]
            y_te = y[test_mask]
            if int(y_te.sum()) == 0:
                report.skipped.append(SkippedFold(r, f, "no positives in test fold"))
                continue
            if int(y_te.sum()) == y_te.shape[0]:
                report.skipped.append(SkippedFold(r, f, "no negatives in test fold"))
                continue
            if np.unique(y_tr).shape[0] < 2:
                report.skipped.append(SkippedFold(r, f, "single-class training fold"))
                continue
            cols = select_columns(features, spec, y_tr, train_mask,
                                  settings.significance)
            X_tr = features.matrix[np.ix_(train_mask, cols)]
            X_te = features.matrix[np.ix_(test_mask, cols)]
            scaler = Standardizer(X_tr)
            X_tr = scaler.transform(X_tr)
            X_te = scaler.transform(X_te)
            if spec.augment:
                fold_cfg = dataclasses.replace(
                    settings.augment,
                    rng_seed=derive_seed("augment", settings.augment.rng_seed, r, f))
                X_tr, y_tr = balance_training_set(X_tr, y_tr, fold_cfg)
            model = classify.fit(X_tr, y_tr, settings.gbdt)
            proba = classify.predict_proba(model, X_te)
            preds = (proba >= settings.threshold).astype(np.int64)
            report.outcomes.append(FoldOutcome(
                repeat=r, fold=f,
                auc=auc(proba, y_te),
                acc_star=acc_star(preds, y_te),
            ))
    return report


def weekly_sweep(bundle: CohortBundle, spec: AblationSpec, plan: FoldPlan,
                 settings: EvalSettings,
                 features_by_week: Mapping[int, FeatureTable] | None = None,
                 ) -> list[tuple[int, MetricReport]]:
    """run_ablation at every cutoff week 1..week_count. A precomputed
    week -> FeatureTable map lets several sweeps share feature tables."""
    results = []
    for week in range(1, bundle.calendar.week_count + 1):
        ft = features_by_week.get(week) if features_by_week else None
        results.append(
            (week, run_ablation(bundle, spec, plan, week, settings, features=ft)))
    return results


def _fmt(x: float | None) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_fold_report(path, reports: Sequence[MetricReport]) -> None:
    """Per-fold rows: ablation,week,repeat,fold,auc,acc_star. Skipped folds
    appear with empty metric cells."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ablation,week,repeat,fold,auc,acc_star\n")
        for rep in reports:
            rows = [(o.repeat, o.fold, _fmt(o.auc), _fmt(o.acc_star))
                    for o in rep.outcomes]
            rows += [(s.repeat, s.fold, "", "") for s in rep.skipped]
            for repeat, fold, a, c in sorted(rows, key=lambda t: (t[0], t[1])):
                fh.write(f"{rep.ablation},{rep.week},{repeat},{fold},{a},{c}\n")


def write_summary_report(path, reports: Sequence[MetricReport]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ablation,week,folds_used,folds_skipped,"
                 "auc_mean,auc_sd,acc_star_mean,acc_star_sd\n")
        for rep in reports:
            fh.write(",".join([
                rep.ablation, str(rep.week),
                str(len(rep.outcomes)), str(len(rep.skipped)),
                _fmt(rep.auc_mean), _fmt(rep.auc_sd),
                _fmt(rep.acc_star_mean), _fmt(rep.acc_star_sd),
            ]) + "\n")


def anova_table(features: FeatureTable, y: np.ndarray) -> list[dict]:
    """Per statistical column: F, p and group means over the whole cohort."""
    y = np.asarray(y)
    rows = []
    pos = y == 1
    for j in features.block_columns("statistical"):
        col = features.matrix[:, j]
        f, p = anova_f(col[pos], col[~pos])
        rows.append({
            "feature": features.column_names[j],
            "p": p,
            "f": f,
            "mean_star": float(col[pos].mean()),
            "mean_normal": float(col[~pos].mean()),
        })
    return rows


def write_anova_table(path, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("feature,p,f,mean_star,mean_normal\n")
        for r in rows:
            f_txt = "inf" if math.isinf(r["f"]) else repr(float(r["f"]))
            fh.write(f"{r['feature']},{repr(float(r['p']))},{f_txt},"
                     f"{repr(float(r['mean_star']))},{repr(float(r['mean_normal']))}\n")
