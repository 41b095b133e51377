"""Event-log parsing, validation, and daily-sequence binarization.

File formats (one record per line, no header):

* events: ``student_id,unix_timestamp,stream,module_kind`` where stream is
  ``lms`` or ``library`` and module_kind is empty for library rows;
* labels: ``student_id,gpa``.
"""

import logging
from bisect import bisect_left
from dataclasses import dataclass
from datetime import datetime
from functools import cached_property

import numpy as np

from .errors import ValidationError
from .model import (
    ActivitySequence,
    BehaviorEvent,
    LmsModule,
    SemesterCalendar,
    StarLabel,
    Stream,
    StudentId,
)

log = logging.getLogger(__name__)

LMS_MODULE_ORDER = list(LmsModule)
_MODULE_BY_VALUE = {m.value: m for m in LmsModule}
_MODULE_INDEX = {m: i for i, m in enumerate(LmsModule)}

# Time-of-day buckets for library check-ins (local hours).
MORNING = (6, 12)
AFTERNOON = (12, 18)
AFTER_MIDNIGHT = (0, 6)
# Calendar-relative windows, in days.
FIRST_MONTH_DAYS = 28
PRE_EXAM_DAYS = 28


def stat_feature_names(prefix: str = "stat_") -> list[str]:
    names = [f"{prefix}lms_{m.value}" for m in LmsModule]
    names += [
        f"{prefix}lib_total",
        f"{prefix}lib_morning",
        f"{prefix}lib_afternoon",
        f"{prefix}lib_after_midnight",
        f"{prefix}lib_first_month",
        f"{prefix}lib_pre_exam",
    ]
    return names


STAT_FEATURE_COUNT = len(stat_feature_names())


def _parse_event_line(line: str, lineno: int, cal: SemesterCalendar):
    parts = line.split(",")
    if len(parts) != 4:
        return None, f"line {lineno}: expected 4 fields, got {len(parts)}"
    sid, ts_text, stream_text, module_text = (p.strip() for p in parts)
    if not sid:
        return None, f"line {lineno}: empty student id"
    try:
        ts = float(ts_text)
    except ValueError:
        return None, f"line {lineno}: bad timestamp {ts_text!r}"
    b = cal.day_boundaries
    if not (b[0] <= ts < b[-1]):
        return None, f"line {lineno}: timestamp outside calendar"
    if stream_text == Stream.LMS.value:
        module = _MODULE_BY_VALUE.get(module_text)
        if module is None:
            return None, f"line {lineno}: unknown LMS module {module_text!r}"
        return BehaviorEvent(sid, ts, Stream.LMS, module), None
    if stream_text == Stream.LIBRARY_CHECKIN.value:
        if module_text:
            return None, f"line {lineno}: library row carries a module kind"
        return BehaviorEvent(sid, ts, Stream.LIBRARY_CHECKIN), None
    return None, f"line {lineno}: unknown stream {stream_text!r}"


EVENT_HEADER = "student_id,unix_timestamp,stream,module_kind"
LABEL_HEADER = "student_id,gpa"


def scan_events(path, cal: SemesterCalendar):
    """Parse an event CSV, returning (time-sorted events, list of bad-row
    messages). Does not raise on malformed rows."""
    events, bad = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or (lineno == 1 and line == EVENT_HEADER):
                continue
            event, err = _parse_event_line(line, lineno, cal)
            if err is not None:
                bad.append(err)
            else:
                events.append(event)
    events.sort(key=lambda e: e.timestamp)
    return events, bad


def parse_events(path, cal: SemesterCalendar, max_bad_rows: int = 0) -> list[BehaviorEvent]:
    """Parse and validate an event CSV. Raises ValidationError if more than
    `max_bad_rows` rows are malformed."""
    events, bad = scan_events(path, cal)
    if bad:
        log.warning("%s: skipped %d malformed event rows", path, len(bad))
    if len(bad) > max_bad_rows:
        shown = "; ".join(bad[:10])
        raise ValidationError(
            f"{path}: {len(bad)} malformed rows (max allowed {max_bad_rows}): {shown}"
        )
    return events


def parse_labels(path) -> list[StarLabel]:
    labels, seen = [], set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or (lineno == 1 and line == LABEL_HEADER):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValidationError(f"{path} line {lineno}: expected 2 fields")
            sid, gpa_text = parts[0].strip(), parts[1].strip()
            try:
                gpa = float(gpa_text)
            except ValueError:
                raise ValidationError(f"{path} line {lineno}: bad gpa {gpa_text!r}") from None
            if sid in seen:
                raise ValidationError(f"{path} line {lineno}: duplicate student {sid!r}")
            seen.add(sid)
            labels.append(StarLabel(sid, gpa))
    return labels


@dataclass(eq=False)
class EventArrays:
    """Columnar view of an event list for vectorized feature extraction.

    `hour` is the calendar-local hour for library rows and -1 for LMS rows
    (LMS features never use time of day).
    """

    students: list[StudentId]
    student_idx: np.ndarray
    timestamps: np.ndarray
    stream: np.ndarray  # 0 = LMS, 1 = library
    module: np.ndarray  # LmsModule ordinal, -1 for library rows
    day: np.ndarray
    hour: np.ndarray

    @classmethod
    def from_events(cls, events: list[BehaviorEvent], cal: SemesterCalendar):
        n = len(events)
        students = sorted({e.student for e in events})
        index = {s: i for i, s in enumerate(students)}
        sid = np.empty(n, dtype=np.int32)
        ts = np.empty(n, dtype=np.float64)
        stream = np.empty(n, dtype=np.int8)
        module = np.full(n, -1, dtype=np.int8)
        hour = np.full(n, -1, dtype=np.int8)
        tz = cal.tzinfo
        for i, e in enumerate(events):
            sid[i] = index[e.student]
            ts[i] = e.timestamp
            if e.stream is Stream.LMS:
                stream[i] = 0
                module[i] = _MODULE_INDEX[e.module_kind]
            else:
                stream[i] = 1
                hour[i] = datetime.fromtimestamp(e.timestamp, tz).hour
        day = cal.day_indices(ts)
        return cls(students, sid, ts, stream, module, day, hour)

    def __len__(self) -> int:
        return self.timestamps.shape[0]


@dataclass(eq=False)
class CohortBundle:
    """One semester's events and labels under a shared calendar."""

    events: list[BehaviorEvent]
    labels: list[StarLabel]
    calendar: SemesterCalendar

    def __post_init__(self):
        for a, b in zip(self.events, self.events[1:]):
            if a.timestamp > b.timestamp:
                raise ValidationError("events must be sorted by timestamp")
        seen = set()
        for lab in self.labels:
            if lab.student in seen:
                raise ValidationError(f"duplicate label for student {lab.student!r}")
            seen.add(lab.student)

    @cached_property
    def arrays(self) -> EventArrays:
        return EventArrays.from_events(self.events, self.calendar)

    @property
    def label_students(self) -> list[StudentId]:
        return sorted(lab.student for lab in self.labels)

    def star_vector(self, students: list[StudentId]) -> np.ndarray:
        by_id = {lab.student: lab.is_star for lab in self.labels}
        return np.array([by_id[s] for s in students], dtype=np.uint8)


def truncate_events(events: list[BehaviorEvent], cutoff: float) -> list[BehaviorEvent]:
    """Events strictly before `cutoff` (input must be time-sorted)."""
    times = [e.timestamp for e in events]
    return events[: bisect_left(times, cutoff)]


def binarize(
    events: list[BehaviorEvent],
    student: StudentId,
    stream: Stream,
    cal: SemesterCalendar,
    cutoff: float,
) -> ActivitySequence:
    """Daily 0/1 sequence for one student and stream, truncated at `cutoff`."""
    if cutoff > cal.end_boundary:
        raise ValidationError("cutoff beyond calendar end")
    bits = np.zeros(cal.day_count, dtype=np.uint8)
    for e in events:
        if e.student == student and e.stream is stream and e.timestamp < cutoff:
            bits[cal.day_index(e.timestamp)] = 1
    return ActivitySequence(student, stream, bits)


def binarize_all(
    arrays: EventArrays,
    students: list[StudentId],
    stream: Stream,
    cal: SemesterCalendar,
    cutoff: float,
) -> np.ndarray:
    """Activity-bit matrix (len(students) x day_count) for one stream."""
    if cutoff > cal.end_boundary:
        raise ValidationError("cutoff beyond calendar end")
    out = np.zeros((len(students), cal.day_count), dtype=np.uint8)
    stream_code = 0 if stream is Stream.LMS else 1
    mask = (arrays.stream == stream_code) & (arrays.timestamps < cutoff)
    row_of = {s: i for i, s in enumerate(students)}
    src_rows = np.array([row_of.get(s, -1) for s in arrays.students], dtype=np.int64)
    rows = src_rows[arrays.student_idx[mask]]
    days = arrays.day[mask]
    keep = rows >= 0
    out[rows[keep], days[keep]] = 1
    return out


def _lib_bucket_columns(day: np.ndarray, hour: np.ndarray, day_count: int):
    """Map each library event to its five bucket-count columns (bool masks)."""
    morning = (hour >= MORNING[0]) & (hour < MORNING[1])
    afternoon = (hour >= AFTERNOON[0]) & (hour < AFTERNOON[1])
    after_midnight = (hour >= AFTER_MIDNIGHT[0]) & (hour < AFTER_MIDNIGHT[1])
    first_month = day < FIRST_MONTH_DAYS
    pre_exam = day >= day_count - PRE_EXAM_DAYS
    return morning, afternoon, after_midnight, first_month, pre_exam


def statistical_features(
    events: list[BehaviorEvent],
    student: StudentId,
    cal: SemesterCalendar,
    cutoff: float,
) -> np.ndarray:
    """Event-count feature vector for one student (see stat_feature_names)."""
    vec = np.zeros(STAT_FEATURE_COUNT, dtype=np.float64)
    lib_base = len(LMS_MODULE_ORDER)
    tz = cal.tzinfo
    for e in events:
        if e.student != student or e.timestamp >= cutoff:
            continue
        if e.stream is Stream.LMS:
            vec[_MODULE_INDEX[e.module_kind]] += 1
            continue
        day = cal.day_index(e.timestamp)
        hour = datetime.fromtimestamp(e.timestamp, tz).hour
        vec[lib_base] += 1
        if MORNING[0] <= hour < MORNING[1]:
            vec[lib_base + 1] += 1
        if AFTERNOON[0] <= hour < AFTERNOON[1]:
            vec[lib_base + 2] += 1
        if AFTER_MIDNIGHT[0] <= hour < AFTER_MIDNIGHT[1]:
            vec[lib_base + 3] += 1
        if day < FIRST_MONTH_DAYS:
            vec[lib_base + 4] += 1
        if day >= cal.day_count - PRE_EXAM_DAYS:
            vec[lib_base + 5] += 1
    return vec


def statistical_features_all(
    arrays: EventArrays,
    students: list[StudentId],
    cal: SemesterCalendar,
    cutoff: float,
) -> np.ndarray:
    """Vectorized statistical_features for a whole cohort."""
    n = len(students)
    out = np.zeros((n, STAT_FEATURE_COUNT), dtype=np.float64)
    row_of = {s: i for i, s in enumerate(students)}
    src_rows = np.array([row_of.get(s, -1) for s in arrays.students], dtype=np.int64)
    rows_all = src_rows[arrays.student_idx]
    before = arrays.timestamps < cutoff
    known = rows_all >= 0

    lms = before & known & (arrays.stream == 0)
    np.add.at(out, (rows_all[lms], arrays.module[lms].astype(np.int64)), 1.0)

    lib = before & known & (arrays.stream == 1)
    rows = rows_all[lib]
    base = len(LMS_MODULE_ORDER)
    np.add.at(out, (rows, np.full(rows.shape, base)), 1.0)
    buckets = _lib_bucket_columns(arrays.day[lib], arrays.hour[lib], cal.day_count)
    for offset, mask in enumerate(buckets, start=1):
        np.add.at(out, (rows[mask], np.full(int(mask.sum()), base + offset)), 1.0)
    return out
