"""Synthetic cohort generator with a planted at-risk signal.

Students are partitioned into fixed-size social cliques. Regular (non-STAR)
clique members visit the library together on the clique's recurring weekdays,
at a shared per-day time, so their daily activity is both highly regular and
strongly co-occurring. STAR students skip the routine: they make sparse solo
visits at unsynchronized times, post less LMS traffic, and skew toward
after-midnight check-ins. Cliques holding two or more STAR students gain
occasional synchronized meet days, so STAR students are not uniformly
isolated in the co-occurrence graph.

Several knobs deliberately blur the signal so no single feature family
separates the classes on its own: a fraction of normal students is
"irregular" (random solo visits, no clique routine), per-student LMS rates
carry mean-normalized lognormal jitter, and STAR visit sparsity varies
per student.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ingest import EVENT_HEADER, LABEL_HEADER, CohortBundle
from .model import (
    BehaviorEvent,
    LmsModule,
    SemesterCalendar,
    StarLabel,
    Stream,
)
from .seeds import rng_for

log = logging.getLogger(__name__)

# Mix of LMS behaviour kinds, shared by both classes (only the rate differs).
_MODULE_WEIGHTS: list[tuple[LmsModule, float]] = [
    (LmsModule.LOGIN, 0.22),
    (LmsModule.LOGOUT, 0.10),
    (LmsModule.COURSE_ACCESS, 0.20),
    (LmsModule.MATERIAL_DOWNLOAD, 0.12),
    (LmsModule.DISCUSSION_BOARD, 0.08),
    (LmsModule.ASSIGNMENT, 0.07),
    (LmsModule.QUIZ, 0.05),
    (LmsModule.GRADE_CENTER, 0.05),
    (LmsModule.ANNOUNCEMENT, 0.04),
    (LmsModule.GROUP_ACCESS, 0.03),
    (LmsModule.JOURNAL, 0.015),
    (LmsModule.PERSONAL_INFO, 0.015),
    (LmsModule.LECTURER_INFO, 0.01),
]
_MODULE_KINDS = [m for m, _ in _MODULE_WEIGHTS]
_MODULE_P = np.array([w for _, w in _MODULE_WEIGHTS])
_MODULE_P /= _MODULE_P.sum()

# Library visit-time windows, as second offsets from local midnight.
_DAY_OPEN_H = 8.0
_DAY_SPAN_H = 14.0
_AM_SPAN_H = 6.0

# Per-attendee jitter around the shared clique visit time. Clipped at 14 s so
# two attendees land within 28 s of each other; whole-second rounding then
# keeps every synchronized pair inside the default 30 s co-occurrence window.
_SYNC_JITTER_SD = 10.0
_SYNC_JITTER_CLIP = 14.0

_GPA_STAR_LO, _GPA_STAR_HI = 0.8, 1.95
_GPA_NORMAL_LO, _GPA_NORMAL_HI = 2.05, 4.2


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the synthetic cohort.

    `n_students` must be divisible by `clique_size` so the clique partition
    is exact. STAR head-count is `round(n_students * star_fraction)`.
    """

    n_students: int = 2000
    star_fraction: float = 0.02
    clique_size: int = 4
    star_clique_bias: float = 0.7
    normal_period: int = 7
    weekdays_per_period: int = 2
    normal_attendance_prob: float = 0.8
    star_noise_prob: float = 0.05
    lms_rate_normal: float = 8.0
    lms_rate_star: float = 5.0
    rng_seed: int = 0
    # heterogeneity: keeps any single feature family from being a clean
    # class separator
    irregular_normal_fraction: float = 0.25
    irregular_visit_prob: float = 0.10
    lms_rate_jitter: float = 0.55
    star_noise_spread: float = 5.0
    star_meet_prob: float = 0.10
    star_meet_attendance: float = 0.75
    after_midnight_prob_star: float = 0.15
    after_midnight_prob_normal: float = 0.04
    star_lms_absent_prob: float = 0.30
    normal_lms_absent_prob: float = 0.02

    def __post_init__(self):
        if self.clique_size < 2:
            raise ValidationError("clique_size must be >= 2")
        if self.n_students < self.clique_size:
            raise ValidationError("n_students must be at least one clique")
        if self.n_students % self.clique_size != 0:
            raise ValidationError(
                f"n_students {self.n_students} not divisible by "
                f"clique_size {self.clique_size}; clique partition infeasible"
            )
        if not 0.0 < self.star_fraction < 0.5:
            raise ValidationError("star_fraction must lie in (0, 0.5)")
        if self.star_count < 1:
            raise ValidationError(
                "star_fraction rounds to zero STAR students at this cohort size"
            )
        if not 1 <= self.weekdays_per_period <= self.normal_period:
            raise ValidationError(
                "weekdays_per_period must lie in [1, normal_period]"
            )
        for name in (
            "star_clique_bias",
            "normal_attendance_prob",
            "star_noise_prob",
            "irregular_normal_fraction",
            "irregular_visit_prob",
            "star_meet_prob",
            "star_meet_attendance",
            "after_midnight_prob_star",
            "after_midnight_prob_normal",
            "star_lms_absent_prob",
            "normal_lms_absent_prob",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.lms_rate_normal < 0 or self.lms_rate_star < 0:
            raise ValidationError("LMS rates must be non-negative")
        if self.lms_rate_jitter < 0:
            raise ValidationError("lms_rate_jitter must be non-negative")
        if self.star_noise_spread < 1.0:
            raise ValidationError("star_noise_spread must be >= 1")

    @property
    def star_count(self) -> int:
        return int(round(self.n_students * self.star_fraction))


def student_ids(n: int) -> list[str]:
    width = max(4, len(str(n - 1)))
    return [f"s{i:0{width}d}" for i in range(n)]


def _draw_labels(cfg: SynthConfig, sids: list[str]):
    rng = rng_for("synth-labels", cfg.rng_seed)
    n = cfg.n_students
    star_idx = np.sort(rng.choice(n, size=cfg.star_count, replace=False))
    is_star = np.zeros(n, dtype=bool)
    is_star[star_idx] = True
    gpa = np.empty(n)
    gpa[is_star] = np.round(
        rng.uniform(_GPA_STAR_LO, _GPA_STAR_HI, size=cfg.star_count), 2
    )
    gpa[~is_star] = np.round(
        rng.uniform(_GPA_NORMAL_LO, _GPA_NORMAL_HI, size=n - cfg.star_count), 2
    )
    labels = [StarLabel(sids[i], float(gpa[i])) for i in range(n)]
    return labels, is_star


def _partition_cliques(cfg: SynthConfig, is_star: np.ndarray) -> np.ndarray:
    """(n_cliques, clique_size) student-index matrix.

    A biased share of STAR students is packed into the leading cliques so
    that STAR-majority cliques exist; the rest are shuffled in with the
    normal population.
    """
    rng = rng_for("synth-cliques", cfg.rng_seed)
    stars = rng.permutation(np.flatnonzero(is_star))
    in_pool = rng.random(stars.size) < cfg.star_clique_bias
    rest = np.concatenate([stars[~in_pool], np.flatnonzero(~is_star)])
    ordering = np.concatenate([stars[in_pool], rng.permutation(rest)])
    return ordering.astype(np.int64).reshape(-1, cfg.clique_size)


def _library_visits(
    cfg: SynthConfig, cal: SemesterCalendar, is_star: np.ndarray
):
    """Arrays (student_index, timestamp) of raw check-ins, unsorted."""
    rng = rng_for("synth-library", cfg.rng_seed)
    n = cfg.n_students
    day_count = cal.day_count
    bounds = cal.day_boundaries
    cliques = _partition_cliques(cfg, is_star)

    irregular = (~is_star) & (rng.random(n) < cfg.irregular_normal_fraction)
    solo_prob = np.zeros(n)
    solo_prob[is_star] = np.minimum(
        cfg.star_noise_prob
        * rng.uniform(1.0, cfg.star_noise_spread, size=int(is_star.sum())),
        0.5,
    )
    solo_prob[irregular] = cfg.irregular_visit_prob

    out_students: list[np.ndarray] = []
    out_times: list[np.ndarray] = []

    def synced(days: np.ndarray, members: np.ndarray, attend_prob: float):
        # one shared base time per day, small per-attendee jitter
        if days.size == 0 or members.size == 0:
            return
        attend = rng.random((days.size, members.size)) < attend_prob
        base = bounds[days] + (_DAY_OPEN_H + _DAY_SPAN_H * rng.random(days.size)) * 3600.0
        jit = np.clip(
            rng.normal(0.0, _SYNC_JITTER_SD, size=attend.shape),
            -_SYNC_JITTER_CLIP,
            _SYNC_JITTER_CLIP,
        )
        drow, mcol = np.nonzero(attend)
        out_students.append(members[mcol])
        out_times.append(base[drow] + jit[drow, mcol])

    all_days = np.arange(day_count)
    for c in range(cliques.shape[0]):
        members = cliques[c]
        # consecutive attendance days: the routine leaves an adjacent-day
        # signature in the activity bits, not just a volume difference
        start = int(rng.integers(cfg.normal_period))
        offsets = (start + np.arange(cfg.weekdays_per_period)) % cfg.normal_period
        pattern_days = all_days[np.isin(all_days % cfg.normal_period, offsets)]
        regulars = members[(~is_star[members]) & (~irregular[members])]
        synced(pattern_days, regulars, cfg.normal_attendance_prob)
        star_members = members[is_star[members]]
        if star_members.size >= 2:
            meet_days = all_days[rng.random(day_count) < cfg.star_meet_prob]
            synced(meet_days, star_members, cfg.star_meet_attendance)

    # solo visits at unsynchronized times, with a class-dependent chance of
    # landing after midnight
    hits = rng.random((n, day_count)) < solo_prob[:, None]
    srow, sday = np.nonzero(hits)
    am = rng.random(srow.size) < np.where(
        is_star[srow], cfg.after_midnight_prob_star, cfg.after_midnight_prob_normal
    )
    u = rng.random(srow.size)
    offset = np.where(am, _AM_SPAN_H * u, _DAY_OPEN_H + _DAY_SPAN_H * u) * 3600.0
    out_students.append(srow)
    out_times.append(bounds[sday] + offset)

    students = np.concatenate(out_students) if out_students else np.empty(0, np.int64)
    times = np.concatenate(out_times) if out_times else np.empty(0)
    return students.astype(np.int64), times


def _lms_events(cfg: SynthConfig, cal: SemesterCalendar, is_star: np.ndarray):
    """Arrays (student_index, timestamp, module_code) of LMS clicks."""
    rng = rng_for("synth-lms", cfg.rng_seed)
    n = cfg.n_students
    day_count = cal.day_count
    bounds = cal.day_boundaries

    rate = np.where(is_star, cfg.lms_rate_star, cfg.lms_rate_normal)
    if cfg.lms_rate_jitter > 0:
        jit = np.exp(rng.normal(0.0, cfg.lms_rate_jitter, size=n))
        jit /= np.exp(cfg.lms_rate_jitter**2 / 2.0)  # mean-normalize
        rate = rate * jit
    # disengagement days: the whole day goes silent, leaving a gap in the
    # daily activity bits that plain volume features barely register
    absent_prob = np.where(
        is_star, cfg.star_lms_absent_prob, cfg.normal_lms_absent_prob
    )
    present = rng.random((n, day_count)) >= absent_prob[:, None]
    counts = rng.poisson(rate[:, None] * present, size=(n, day_count))

    cell = np.repeat(np.arange(n * day_count), counts.ravel())
    student = cell // day_count
    day = cell % day_count
    u = rng.random(student.size)
    ts = bounds[day] + u * (bounds[day + 1] - bounds[day])
    kind = rng.choice(len(_MODULE_KINDS), size=student.size, p=_MODULE_P)
    return student.astype(np.int64), ts, kind.astype(np.int64)


def generate(cfg: SynthConfig, cal: SemesterCalendar) -> CohortBundle:
    """Simulate one cohort semester. Fully determined by cfg.rng_seed."""
    sids = student_ids(cfg.n_students)
    labels, is_star = _draw_labels(cfg, sids)

    lib_student, lib_ts = _library_visits(cfg, cal, is_star)
    lms_student, lms_ts, lms_kind = _lms_events(cfg, cal, is_star)

    student = np.concatenate([lms_student, lib_student])
    ts = np.round(np.concatenate([lms_ts, lib_ts]))
    # whole-second rounding must not escape the calendar
    ts = np.minimum(ts, cal.end_boundary - 1.0)
    # code 0..12 = LMS module, 13 = library check-in
    kind = np.concatenate(
        [lms_kind, np.full(lib_student.size, len(_MODULE_KINDS), dtype=np.int64)]
    )

    order = np.lexsort((kind, student, ts))
    events = [
        BehaviorEvent(
            sids[s],
            float(t),
            Stream.LMS if k < len(_MODULE_KINDS) else Stream.LIBRARY_CHECKIN,
            _MODULE_KINDS[k] if k < len(_MODULE_KINDS) else None,
        )
        for s, t, k in zip(
            student[order].tolist(), ts[order].tolist(), kind[order].tolist()
        )
    ]
    log.info(
        "simulated cohort: %d students (%d STAR), %d events",
        cfg.n_students,
        cfg.star_count,
        len(events),
    )
    return CohortBundle(events=events, labels=labels, calendar=cal)


def _class_summary(
    arrays, members: set[str], day_count: int
) -> dict[str, float]:
    pop = len(members)
    zeros = {
        "population": pop,
        "lms_events": 0,
        "library_checkins": 0,
        "lms_events_per_student": 0.0,
        "library_checkins_per_student": 0.0,
        "checkins_first_two_weeks_per_student": 0.0,
        "checkins_last_two_weeks_per_student": 0.0,
    }
    if pop == 0 or len(arrays) == 0:
        return zeros
    in_class = np.array([s in members for s in arrays.students])
    row_mask = in_class[arrays.student_idx]
    stream = arrays.stream[row_mask]
    day = arrays.day[row_mask]
    lib = stream == 1
    first = lib & (day < 14)
    last = lib & (day >= day_count - 14)
    zeros.update(
        lms_events=int((stream == 0).sum()),
        library_checkins=int(lib.sum()),
        lms_events_per_student=float((stream == 0).sum() / pop),
        library_checkins_per_student=float(lib.sum() / pop),
        checkins_first_two_weeks_per_student=float(first.sum() / pop),
        checkins_last_two_weeks_per_student=float(last.sum() / pop),
    )
    return zeros


def describe(bundle: CohortBundle) -> dict:
    """Per-class cohort summary (population, traffic volumes, and check-in
    averages over the opening and closing fortnights)."""
    star = {lab.student for lab in bundle.labels if lab.is_star}
    normal = {lab.student for lab in bundle.labels if not lab.is_star}
    day_count = bundle.calendar.day_count
    arrays = bundle.arrays
    return {
        "star": _class_summary(arrays, star, day_count),
        "normal": _class_summary(arrays, normal, day_count),
    }


def write_events(events: list[BehaviorEvent], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(EVENT_HEADER + "\n")
        for e in events:
            module = e.module_kind.value if e.module_kind is not None else ""
            fh.write(f"{e.student},{int(e.timestamp)},{e.stream.value},{module}\n")


def write_labels(labels: list[StarLabel], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(LABEL_HEADER + "\n")
        for lab in labels:
            fh.write(f"{lab.student},{lab.gpa:.2f}\n")
