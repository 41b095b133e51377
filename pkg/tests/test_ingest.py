import numpy as np
import pytest

from starpredict.errors import ValidationError
from starpredict.ingest import (
    EVENT_HEADER,
    LABEL_HEADER,
    STAT_FEATURE_COUNT,
    CohortBundle,
    EventArrays,
    binarize,
    binarize_all,
    parse_events,
    parse_labels,
    scan_events,
    stat_feature_names,
    statistical_features,
    statistical_features_all,
    truncate_events,
)
from starpredict.model import BehaviorEvent, LmsModule, Stream


def _lib(student, ts):
    return BehaviorEvent(student, ts, Stream.LIBRARY_CHECKIN)


def _lms(student, ts, kind=LmsModule.LOGIN):
    return BehaviorEvent(student, ts, Stream.LMS, kind)


def test_parse_events_empty_file(tmp_path, calendar):
    path = tmp_path / "events.csv"
    path.write_text("")
    assert parse_events(path, calendar) == []


def test_parse_events_single_library_row(tmp_path, calendar):
    start = int(calendar.day_boundaries[0])
    path = tmp_path / "events.csv"
    path.write_text(f"s01,{start},library,\n")
    events = parse_events(path, calendar)
    assert len(events) == 1
    assert events[0].stream is Stream.LIBRARY_CHECKIN
    assert calendar.day_index(events[0].timestamp) == 0


def test_parse_events_header_row_skipped(tmp_path, calendar):
    start = int(calendar.day_boundaries[0])
    path = tmp_path / "events.csv"
    path.write_text(f"{EVENT_HEADER}\ns01,{start},library,\n")
    assert len(parse_events(path, calendar)) == 1


def test_parse_events_strict_mode_names_line(tmp_path, calendar):
    start = int(calendar.day_boundaries[0])
    rows = [f"s{i:02d},{start + i},lms,login" for i in range(10)]
    rows[4] = "s04,notatime,lms,login"
    path = tmp_path / "events.csv"
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(ValidationError, match="line 5"):
        parse_events(path, calendar, max_bad_rows=0)
    events = parse_events(path, calendar, max_bad_rows=1)
    assert len(events) == 9


def test_scan_events_reports_bad_rows(tmp_path, calendar):
    start = int(calendar.day_boundaries[0])
    path = tmp_path / "events.csv"
    path.write_text(
        f"s01,{start},library,\n"
        "s02,123,badstream,\n"
        f"s03,{start},library,login\n"
        f"s04,{start - 99999},library,\n"
        f"s05,{start},lms,notamodule\n"
    )
    events, bad = scan_events(path, calendar)
    assert len(events) == 1
    assert len(bad) == 4


def test_parse_events_sorted_output(tmp_path, calendar):
    start = int(calendar.day_boundaries[0])
    path = tmp_path / "events.csv"
    path.write_text(
        f"s01,{start + 50},lms,quiz\n"
        f"s02,{start + 10},library,\n"
        f"s03,{start + 30},lms,login\n"
    )
    events = parse_events(path, calendar)
    assert [e.timestamp for e in events] == sorted(e.timestamp for e in events)


def test_parse_labels_roundtrip_and_errors(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text(f"{LABEL_HEADER}\ns01,1.85\ns02,3.20\n")
    labels = parse_labels(path)
    assert [(l.student, l.gpa) for l in labels] == [("s01", 1.85), ("s02", 3.2)]
    assert labels[0].is_star and not labels[1].is_star

    (tmp_path / "dup.csv").write_text("s01,1.0\ns01,2.0\n")
    with pytest.raises(ValidationError, match="duplicate"):
        parse_labels(tmp_path / "dup.csv")
    (tmp_path / "bad.csv").write_text("s01,low\n")
    with pytest.raises(ValidationError):
        parse_labels(tmp_path / "bad.csv")


def test_cohort_bundle_requires_sorted_events(calendar):
    start = calendar.day_boundaries[0]
    events = [_lib("a", start + 10), _lib("b", start + 5)]
    with pytest.raises(ValidationError, match="sorted"):
        CohortBundle(events=events, labels=[], calendar=calendar)


def test_binarize_examples(calendar):
    start = calendar.day_boundaries[0]
    events = sorted(
        [
            _lib("s1", start + 5 * 86400 + 100),
            _lib("s1", start + 5 * 86400 + 200),
            _lib("s1", start + 5 * 86400 + 300),
            _lib("s1", start + 9 * 86400 + 50),
        ],
        key=lambda e: e.timestamp,
    )
    full = binarize(events, "s1", Stream.LIBRARY_CHECKIN, calendar,
                    calendar.end_boundary)
    assert np.flatnonzero(full.bits).tolist() == [5, 9]
    week1 = binarize(events, "s1", Stream.LIBRARY_CHECKIN, calendar,
                     calendar.week_cutoff(1))
    assert np.flatnonzero(week1.bits).tolist() == [5]
    missing = binarize(events, "nobody", Stream.LIBRARY_CHECKIN, calendar,
                       calendar.end_boundary)
    assert not missing.bits.any()


def test_binarize_popcount_bounded_by_events(calendar):
    start = calendar.day_boundaries[0]
    rng = np.random.default_rng(2)
    events = sorted(
        (_lib("s1", start + float(t)) for t in
         rng.integers(0, 91 * 86400, size=40)),
        key=lambda e: e.timestamp,
    )
    seq = binarize(events, "s1", Stream.LIBRARY_CHECKIN, calendar,
                   calendar.end_boundary)
    assert int(seq.bits.sum()) <= 40


def test_binarize_truncation_monotone(calendar):
    start = calendar.day_boundaries[0]
    rng = np.random.default_rng(3)
    events = sorted(
        (_lib("s1", start + float(t)) for t in
         rng.integers(0, 91 * 86400, size=60)),
        key=lambda e: e.timestamp,
    )
    prev = np.zeros(calendar.day_count, dtype=np.uint8)
    for week in range(1, 14):
        bits = binarize(events, "s1", Stream.LIBRARY_CHECKIN, calendar,
                        calendar.week_cutoff(week)).bits
        assert (bits >= prev).all()
        prev = bits


def test_truncate_events_subset(calendar):
    start = calendar.day_boundaries[0]
    events = sorted(
        (_lib("s", start + i * 86400.0) for i in range(20)),
        key=lambda e: e.timestamp,
    )
    w1 = truncate_events(events, calendar.week_cutoff(1))
    w2 = truncate_events(events, calendar.week_cutoff(2))
    assert len(w1) == 7 and len(w2) == 14
    assert w1 == w2[: len(w1)]


def test_stat_feature_names_count():
    names = stat_feature_names()
    assert len(names) == STAT_FEATURE_COUNT == 19
    assert len(set(names)) == 19


def test_statistical_features_bucket_example(calendar):
    start = calendar.day_boundaries[0]
    events = [
        _lib("s1", start + 9 * 3600.0),
        _lib("s1", start + 14 * 3600.0),
    ]
    vec = statistical_features(events, "s1", calendar, calendar.end_boundary)
    names = stat_feature_names()
    by_name = dict(zip(names, vec))
    assert by_name["stat_lib_total"] == 2
    assert by_name["stat_lib_morning"] == 1
    assert by_name["stat_lib_afternoon"] == 1
    assert by_name["stat_lib_after_midnight"] == 0
    assert by_name["stat_lib_first_month"] == 2
    assert by_name["stat_lib_pre_exam"] == 0


def test_statistical_features_single_login(calendar):
    start = calendar.day_boundaries[0]
    vec = statistical_features([_lms("s1", start + 60.0)], "s1", calendar,
                               calendar.end_boundary)
    assert vec[list(LmsModule).index(LmsModule.LOGIN)] == 1
    assert vec.sum() == 1


def test_statistical_features_additive(calendar):
    start = calendar.day_boundaries[0]
    a = [_lms("s1", start + 100.0, LmsModule.QUIZ),
         _lib("s1", start + 2 * 3600.0)]
    b = [_lib("s1", start + 80 * 86400.0 + 7 * 3600.0)]
    va = statistical_features(a, "s1", calendar, calendar.end_boundary)
    vb = statistical_features(b, "s1", calendar, calendar.end_boundary)
    vab = statistical_features(sorted(a + b, key=lambda e: e.timestamp),
                               "s1", calendar, calendar.end_boundary)
    assert np.array_equal(vab, va + vb)


def test_vectorized_paths_match_scalar(calendar):
    start = calendar.day_boundaries[0]
    rng = np.random.default_rng(11)
    students = [f"s{i}" for i in range(5)]
    events = []
    for sid in students:
        for t in rng.integers(0, 91 * 86400, size=30):
            if rng.random() < 0.5:
                events.append(_lib(sid, start + float(t)))
            else:
                kind = list(LmsModule)[int(rng.integers(13))]
                events.append(_lms(sid, start + float(t), kind))
    events.sort(key=lambda e: e.timestamp)
    arrays = EventArrays.from_events(events, calendar)
    cutoff = calendar.week_cutoff(7)

    mat = statistical_features_all(arrays, students, calendar, cutoff)
    for i, sid in enumerate(students):
        assert np.array_equal(
            mat[i], statistical_features(events, sid, calendar, cutoff))

    bits = binarize_all(arrays, students, Stream.LMS, calendar, cutoff)
    for i, sid in enumerate(students):
        assert np.array_equal(
            bits[i], binarize(events, sid, Stream.LMS, calendar, cutoff).bits)
