import dataclasses

import numpy as np
import pytest

from starpredict import cograph, featurize, regularity, synthgen
from starpredict.errors import ValidationError
from starpredict.ingest import CohortBundle, parse_events, parse_labels
from starpredict.model import Stream
from starpredict.synthgen import (
    SynthConfig,
    _partition_cliques,
    describe,
    generate,
    student_ids,
    write_events,
    write_labels,
)


def _cfg(**kw):
    return dataclasses.replace(SynthConfig(), **kw)


def test_config_validation():
    with pytest.raises(ValidationError, match="divisible"):
        _cfg(n_students=102, clique_size=4)
    with pytest.raises(ValidationError):
        _cfg(clique_size=1)
    with pytest.raises(ValidationError):
        _cfg(n_students=2, clique_size=4)
    with pytest.raises(ValidationError):
        _cfg(star_fraction=0.0)
    with pytest.raises(ValidationError):
        _cfg(star_fraction=0.6)
    with pytest.raises(ValidationError, match="rounds to zero"):
        _cfg(n_students=8, clique_size=4, star_fraction=0.01)
    with pytest.raises(ValidationError):
        _cfg(weekdays_per_period=8)
    with pytest.raises(ValidationError):
        _cfg(normal_attendance_prob=1.5)
    with pytest.raises(ValidationError):
        _cfg(lms_rate_star=-1.0)


def test_star_count_rounding():
    assert _cfg(n_students=1000, star_fraction=0.02).star_count == 20
    assert _cfg(n_students=2000).star_count == 40
    assert _cfg(n_students=148, star_fraction=0.03).star_count == 4


def test_student_ids_padding():
    ids = student_ids(60)
    assert ids[0] == "s0000" and ids[-1] == "s0059"
    assert student_ids(20000)[-1] == "s19999"
    assert len(set(ids)) == 60


def test_generate_deterministic(short_calendar):
    cfg = _cfg(n_students=40, star_fraction=0.1, rng_seed=3)
    a = generate(cfg, short_calendar)
    b = generate(cfg, short_calendar)
    assert a.events == b.events
    assert a.labels == b.labels
    c = generate(dataclasses.replace(cfg, rng_seed=4), short_calendar)
    assert a.events != c.events


def test_label_counts_and_gpa_ranges(short_calendar):
    cfg = _cfg(n_students=100, star_fraction=0.1, rng_seed=0)
    bundle = generate(cfg, short_calendar)
    stars = [l for l in bundle.labels if l.is_star]
    assert len(stars) == 10
    assert all(l.gpa < 2.0 for l in stars)
    assert all(l.gpa >= 2.0 for l in bundle.labels if not l.is_star)


def test_full_bias_packs_stars_together():
    cfg = _cfg(n_students=80, star_fraction=0.1, star_clique_bias=1.0,
               rng_seed=1)
    is_star = np.zeros(80, dtype=bool)
    is_star[np.random.default_rng(0).choice(80, size=8, replace=False)] = True
    cliques = _partition_cliques(cfg, is_star)
    flat = cliques.ravel()
    assert sorted(flat.tolist()) == list(range(80))
    # all stars occupy the leading cliques, so 8 stars fill 2 cliques exactly
    star_rows = {r for r in range(cliques.shape[0])
                 if is_star[cliques[r]].any()}
    assert len(star_rows) == 2
    for r in star_rows:
        assert is_star[cliques[r]].all()


def test_noise_free_normals_exactly_periodic(short_calendar):
    cfg = _cfg(
        n_students=24, star_fraction=0.05, rng_seed=7,
        normal_attendance_prob=1.0, star_noise_prob=0.0,
        irregular_normal_fraction=0.0, star_meet_prob=0.0,
    )
    bundle = generate(cfg, short_calendar)
    star_ids = {l.student for l in bundle.labels if l.is_star}
    day_count = short_calendar.day_count
    by_student: dict[str, set[int]] = {}
    for e in bundle.events:
        if e.stream is Stream.LIBRARY_CHECKIN:
            by_student.setdefault(e.student, set()).add(
                short_calendar.day_index(e.timestamp))
    assert set(by_student) == {l.student for l in bundle.labels
                               if not l.is_star}
    for sid, days in by_student.items():
        assert sid not in star_ids
        # exact periodic pattern: weekdays_per_period consecutive offsets
        offs = sorted({d % cfg.normal_period for d in days})
        assert len(offs) == cfg.weekdays_per_period
        width = (offs[-1] - offs[0]) % cfg.normal_period
        gaps = {(offs[(i + 1) % len(offs)] - offs[i]) % cfg.normal_period
                for i in range(len(offs))}
        assert width == cfg.weekdays_per_period - 1 or gaps <= {1, cfg.normal_period - 1}
        expected = {d for d in range(day_count)
                    if d % cfg.normal_period in offs}
        assert days == expected


def test_periodic_regularity_mass_concentrated(short_calendar):
    cfg = _cfg(
        n_students=24, star_fraction=0.05, rng_seed=7,
        normal_attendance_prob=1.0, star_noise_prob=0.0,
        irregular_normal_fraction=0.0, star_meet_prob=0.0,
    )
    bundle = generate(cfg, short_calendar)
    from starpredict.ingest import binarize_all

    normals = [l.student for l in bundle.labels if not l.is_star]
    bits = binarize_all(bundle.arrays, normals, Stream.LIBRARY_CHECKIN,
                        short_calendar, short_calendar.end_boundary)
    rc = regularity.RegularityConfig()
    mat = regularity.extract_matrix(bits, rc)
    names = regularity.feature_names(rc, "")
    # the two-day routine guarantees adjacent-day '11' windows for everyone
    j = names.index("s1_p11")
    assert np.all(mat[:, j] > 0)


def test_describe_contrast_and_schema(small_bundle):
    d = describe(small_bundle)
    assert set(d) == {"star", "normal"}
    for cls in ("star", "normal"):
        assert set(d[cls]) == {
            "population", "lms_events", "library_checkins",
            "lms_events_per_student", "library_checkins_per_student",
            "checkins_first_two_weeks_per_student",
            "checkins_last_two_weeks_per_student",
        }
    assert d["star"]["population"] == 6
    assert d["normal"]["population"] == 54
    assert (d["star"]["lms_events_per_student"]
            < d["normal"]["lms_events_per_student"])
    assert (d["star"]["library_checkins_per_student"]
            < d["normal"]["library_checkins_per_student"])


def test_describe_empty_bundle(short_calendar):
    bundle = CohortBundle(events=[], labels=[], calendar=short_calendar)
    d = describe(bundle)
    for cls in ("star", "normal"):
        assert d[cls]["population"] == 0
        assert d[cls]["lms_events"] == 0
        assert d[cls]["checkins_last_two_weeks_per_student"] == 0.0


def test_intra_clique_edges_dominate(small_bundle, quick_settings):
    cal = small_bundle.calendar
    cfg = _cfg(n_students=60, star_fraction=0.1, rng_seed=5)
    is_star = np.array([l.is_star for l in small_bundle.labels])
    cliques = _partition_cliques(cfg, is_star)
    clique_of = np.empty(60, dtype=np.int64)
    for r in range(cliques.shape[0]):
        clique_of[cliques[r]] = r
    g = featurize.build_graph(small_bundle, cal.end_boundary,
                              cograph.CoocConfig())
    sid_pos = {s: i for i, s in enumerate(small_bundle.label_students)}
    intra, inter = [], []
    for u, v, w in g.edges():
        if clique_of[sid_pos[u]] == clique_of[sid_pos[v]]:
            intra.append(w)
        else:
            inter.append(w)
    assert intra
    assert np.mean(intra) > (np.mean(inter) if inter else 0.0)


def test_csv_roundtrip_through_parsers(tmp_path, short_calendar):
    cfg = _cfg(n_students=20, star_fraction=0.1, rng_seed=9)
    bundle = generate(cfg, short_calendar)
    write_events(bundle.events, tmp_path / "events.csv")
    write_labels(bundle.labels, tmp_path / "labels.csv")
    events = parse_events(tmp_path / "events.csv", short_calendar,
                          max_bad_rows=0)
    labels = parse_labels(tmp_path / "labels.csv")
    assert events == bundle.events
    assert labels == bundle.labels
