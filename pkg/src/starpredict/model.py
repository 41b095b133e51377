"""Domain types shared by every pipeline stage.

Students are identified by opaque strings. All timestamps are seconds since
the Unix epoch (UTC); day boundaries are computed in the single timezone the
calendar was configured with, so "same local day" means the same thing in
every stage.
"""

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from enum import Enum
from functools import cached_property
from math import ceil
from zoneinfo import ZoneInfo

import numpy as np

from .errors import CalendarRangeError, ValidationError

StudentId = str

STAR_GPA_THRESHOLD = 2.0
GPA_MAX = 4.3


class Stream(Enum):
    LMS = "lms"
    LIBRARY_CHECKIN = "library"


class LmsModule(Enum):
    """The 13 clickstream behaviour kinds tracked on the LMS."""

    LOGIN = "login"
    LOGOUT = "logout"
    ANNOUNCEMENT = "announcement"
    COURSE_ACCESS = "course_access"
    GRADE_CENTER = "grade_center"
    DISCUSSION_BOARD = "discussion_board"
    GROUP_ACCESS = "group_access"
    PERSONAL_INFO = "personal_info"
    LECTURER_INFO = "lecturer_info"
    JOURNAL = "journal"
    ASSIGNMENT = "assignment"
    QUIZ = "quiz"
    MATERIAL_DOWNLOAD = "material_download"


@dataclass(frozen=True)
class SemesterCalendar:
    """Semester span with day-level indexing in a fixed timezone.

    `end` is the last day of the semester (inclusive). Week `w` covers day
    indices [7*(w-1), 7*w).
    """

    start: date
    end: date
    week_count: int
    timezone: str = "UTC"

    def __post_init__(self):
        if self.end <= self.start:
            raise ValidationError("calendar end must be after start")
        expected = ceil(self.day_count / 7)
        if self.week_count != expected:
            raise ValidationError(
                f"week_count {self.week_count} inconsistent with span "
                f"({self.day_count} days -> {expected} weeks)"
            )

    @classmethod
    def from_weeks(cls, start: date, week_count: int, timezone: str = "UTC"):
        if week_count < 1:
            raise ValidationError("week_count must be >= 1")
        end = start + timedelta(days=week_count * 7 - 1)
        return cls(start=start, end=end, week_count=week_count, timezone=timezone)

    @property
    def day_count(self) -> int:
        return (self.end - self.start).days + 1

    @cached_property
    def tzinfo(self) -> ZoneInfo:
        return ZoneInfo(self.timezone)

    @cached_property
    def day_boundaries(self) -> np.ndarray:
        """Epoch timestamps of local midnight for days 0..day_count (inclusive
        upper boundary), suitable for `searchsorted` day indexing."""
        out = np.empty(self.day_count + 1, dtype=np.float64)
        for d in range(self.day_count + 1):
            local = datetime.combine(self.start + timedelta(days=d), datetime.min.time())
            out[d] = local.replace(tzinfo=self.tzinfo).timestamp()
        return out

    def day_index(self, timestamp: float) -> int:
        """0-based day ordinal of an epoch timestamp, in calendar-local time."""
        b = self.day_boundaries
        if not (b[0] <= timestamp < b[-1]):
            raise CalendarRangeError(
                f"timestamp {timestamp} outside calendar [{self.start}, {self.end}]"
            )
        return int(np.searchsorted(b, timestamp, side="right")) - 1

    def day_indices(self, timestamps: np.ndarray) -> np.ndarray:
        """Vectorized `day_index`; out-of-range entries map to -1."""
        b = self.day_boundaries
        idx = np.searchsorted(b, timestamps, side="right") - 1
        bad = (timestamps < b[0]) | (timestamps >= b[-1])
        idx[bad] = -1
        return idx.astype(np.int64)

    def week_cutoff(self, week: int) -> float:
        """The instant at which week `week` ends; events at or after it are
        excluded by truncation."""
        if not 1 <= week <= self.week_count:
            raise CalendarRangeError(
                f"week {week} out of range 1..{self.week_count}"
            )
        return float(self.day_boundaries[min(7 * week, self.day_count)])

    @property
    def end_boundary(self) -> float:
        return float(self.day_boundaries[-1])


def day_index(timestamp: float, cal: SemesterCalendar) -> int:
    return cal.day_index(timestamp)


def week_cutoff(cal: SemesterCalendar, week: int) -> float:
    return cal.week_cutoff(week)


@dataclass(frozen=True, slots=True)
class BehaviorEvent:
    student: StudentId
    timestamp: float
    stream: Stream
    module_kind: LmsModule | None = None

    def __post_init__(self):
        if not self.student:
            raise ValidationError("event student id must be non-empty")
        if self.stream is Stream.LMS and self.module_kind is None:
            raise ValidationError("LMS event requires a module_kind")
        if self.stream is Stream.LIBRARY_CHECKIN and self.module_kind is not None:
            raise ValidationError("library event must not carry a module_kind")


@dataclass(eq=False)
class ActivitySequence:
    """Per-student daily activity bits for one stream (1 = any matching event
    that day)."""

    student: StudentId
    stream: Stream
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1:
            raise ValidationError("bits must be a 1-D vector")
        if bits.size and bits.max() > 1:
            raise ValidationError("bits must be 0/1")
        self.bits = bits


@dataclass(frozen=True)
class StarLabel:
    student: StudentId
    gpa: float

    def __post_init__(self):
        if not self.student:
            raise ValidationError("label student id must be non-empty")
        if not 0.0 <= self.gpa <= GPA_MAX:
            raise ValidationError(f"gpa {self.gpa} outside [0, {GPA_MAX}]")

    @property
    def is_star(self) -> bool:
        return self.gpa < STAR_GPA_THRESHOLD


@dataclass(eq=False)
class FeatureTable:
    """Aligned per-student feature rows.

    `blocks` names contiguous column spans (e.g. statistical / regularity /
    embedding) so ablations can select feature groups by name.
    """

    students: list[StudentId]
    matrix: np.ndarray
    column_names: list[str]
    blocks: dict[str, slice] = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != len(self.students):
            raise ValidationError("matrix shape does not match student count")
        if m.shape[1] != len(self.column_names):
            raise ValidationError("matrix width does not match column names")
        if m.size and not np.isfinite(m).all():
            raise ValidationError("feature matrix contains NaN or inf")
        covered = sum(s.stop - s.start for s in self.blocks.values())
        if self.blocks and covered != m.shape[1]:
            raise ValidationError("blocks do not tile the feature columns")
        self.matrix = m

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    def row(self, student: StudentId) -> np.ndarray:
        return self.matrix[self.students.index(student)]

    def block_columns(self, name: str) -> np.ndarray:
        sl = self.blocks[name]
        return np.arange(sl.start, sl.stop)
