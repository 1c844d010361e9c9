import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lumigroup import semlog as sl
from lumigroup.errors import TooEarly, UnknownDevice
from lumigroup.mlkit import Kind

MONDAY = dt.date(2024, 1, 1)


@pytest.fixture(scope="module")
def dense_year():
    return sl.generate_log("dense", 365, rng=7)


def at(day, hour, minute=0):
    return dt.datetime.combine(MONDAY + dt.timedelta(days=day), dt.time(hour, minute))


def entry(day, hour, dur, dev="personal-00"):
    return sl.AssociationLogEntry(at(day, hour), dur, {sl.OWNER, dev})


# -- calendar -----------------------------------------------------------------------------------


@pytest.mark.parametrize("day, kind", [
    (dt.date(2024, 1, 1), sl.DayKind.HOLIDAY),
    (dt.date(2024, 1, 2), sl.DayKind.WORKDAY),
    (dt.date(2024, 1, 6), sl.DayKind.HOLIDAY),  # a Saturday, but listed
    (dt.date(2024, 1, 7), sl.DayKind.WEEKEND),
    (dt.date(2024, 12, 25), sl.DayKind.HOLIDAY),
])
def test_day_kind(day, kind):
    assert sl.day_kind(day) is kind


def test_allowed_minutes_merge():
    rules = sl.RULES[sl.DeviceClass.PERSONAL]
    assert sl.allowed_minutes(rules, sl.DayKind.WORKDAY) == [(300, 600), (720, 1260)]
    assert sl.allowed_minutes(rules, sl.DayKind.WEEKEND) == [(720, 1260)]
    assert sl.allowed_minutes(sl.RULES[sl.DeviceClass.WELLKNOWN_STRANGER], sl.DayKind.HOLIDAY) == [(0, 1440)]


def test_group_rules_union():
    mixed = sl.group_rules((sl.DeviceClass.PERSONAL, sl.DeviceClass.WELLKNOWN_STRANGER))
    assert sl.allowed_minutes(mixed, sl.DayKind.WEEKEND) == [(0, 1440)]


def test_testbeds():
    assert sl.testbed("DENSE").devices_per_group == 9
    with pytest.raises(ValueError):
        sl.testbed("huge")


# -- generation ---------------------------------------------------------------------------------


def test_full_year_complies(dense_year):
    log = dense_year
    for e in log.entries:
        (dev,) = e.device_ids - {sl.OWNER}
        assert sl.complies(e.start, sl.group_rules(log.groups[dev]), log.holidays)


def test_dense_shape(dense_year):
    log = dense_year
    assert len(log.devices) == 27
    assert np.bincount(log.labels()).tolist() == [9, 9, 9]
    durs = np.array([e.duration_min for e in log.entries])
    assert durs.min() >= 30 and durs.max() <= 180
    assert all(len(e.device_ids) == 2 and sl.OWNER in e.device_ids for e in log.entries)


def test_stranger_covers_every_hour(dense_year):
    hours = {e.start.hour for e in dense_year.entries if any("stranger" in d for d in e.device_ids)}
    assert hours == set(range(24))


def test_close_classes_never_at_night(dense_year):
    for e in dense_year.entries:
        if any(d.startswith(("personal", "family")) for d in e.device_ids):
            assert 5 <= e.start.hour < 21


def test_weekly_counts_in_range(dense_year):
    log = dense_year
    s = sl._Series(log)
    for dev, group in log.groups.items():
        # full weeks only: the log starts on a Monday
        weekly = s.daily_cnt[s.index[dev], :364].reshape(52, 7).sum(axis=1)
        lo, hi = sl.WEEKLY_COUNTS[group[0]]
        assert weekly.min() >= lo and weekly.max() <= hi


def test_mixtures_label_count():
    log = sl.generate_log("sparse", 14, rng=0, mixtures=True)
    assert len(log.group_kinds) == 7
    assert len(log.devices) == 21


def test_prefix_stable():
    short = sl.generate_log("medium", 28, rng=3)
    long = sl.generate_log("medium", 56, rng=3)
    cut = tuple(e for e in long.entries if e.start.date() < MONDAY + dt.timedelta(days=28))
    assert [e.key for e in short.entries] == [e.key for e in cut]


def test_too_short_log():
    with pytest.raises(TooEarly):
        sl.generate_log("dense", 6)


def test_clean_log():
    raw = [entry(0, 9, 30), entry(0, 9, 30), sl.AssociationLogEntry(at(1, 9), 10, {sl.OWNER}), entry(0, 8, 5)]
    out = sl.clean_log(raw)
    assert [e.key for e in out] == [entry(0, 8, 5).key, entry(0, 9, 30).key]
    assert sl.clean_log(out) == out


def test_csv_round_trip(tmp_path):
    log = sl.generate_log("sparse", 14, rng=1)
    p = tmp_path / "log.csv"
    sl.write_log_csv(log, p)
    back = sl.log_from_entries(sl.read_log_csv(p), "sparse", days=14, start_date=MONDAY)
    assert [e.key for e in back.entries] == [e.key for e in log.entries]
    assert back.groups == log.groups


# -- features -----------------------------------------------------------------------------------


def hand_log():
    entries = [entry(0, 9, 30.0), entry(0, 18, 60.0), entry(8, 13, 20.0), entry(2, 13, 45.0, "wellknown_stranger-00")]
    return sl.log_from_entries(entries, days=14, start_date=MONDAY)


def test_feature_arithmetic():
    f = sl.extract_feature_sets(hand_log(), "personal-00", 14)
    # windows are [trailing week, trailing four weeks, whole history]
    np.testing.assert_allclose(f["grouping_time_per_event-sum"], [20, 110, 110])
    np.testing.assert_allclose(f["grouping_time_per_event"], [20, 30, 30])
    np.testing.assert_allclose(f["grouping_time_per_event-max"], [20, 60, 60])
    np.testing.assert_allclose(f["grouping_time_per_day-max"], [20, 90, 90])
    np.testing.assert_allclose(f["grouping_time_per_day"], [0, 0, 0])
    np.testing.assert_allclose(f["contact_frequency_per_week-sum"], [1, 3, 3])
    np.testing.assert_allclose(f["contact_frequency_per_week-mean"], [1, 1.5, 1.5])
    np.testing.assert_allclose(f["contact_frequency_per_day-sum"], [1, 3, 3])
    np.testing.assert_allclose(f["time_ratio_per_day-max"], [20 / 1440, 90 / 1440, 90 / 1440])
    np.testing.assert_allclose(f["time_ratio_per_week-sum"], [20 / 10080, 110 / 10080, 110 / 10080])
    assert f["combined"].shape == (10,)
    assert len(f) == len(sl.FEATURE_SET_NAMES) == 43


def test_feature_cutoff_ignores_later_days():
    f = sl.extract_feature_sets(hand_log(), "personal-00", 7)
    np.testing.assert_allclose(f["grouping_time_per_event-sum"], [90, 90, 90])


def test_no_encounters_gives_zeros():
    f = sl.extract_feature_sets(hand_log(), "wellknown_stranger-00", 2)
    assert all(np.all(v == 0) for v in f.values())


def test_unknown_device():
    with pytest.raises(UnknownDevice):
        sl.extract_feature_sets(hand_log(), "nobody-00")


@given(st.sampled_from(sl.FEATURE_SET_NAMES), st.integers(7, 60))
def test_features_finite_and_nonnegative(name, t):
    log = _small_log()
    X, y = sl.feature_matrix(log, name, t)
    assert X.shape[0] == len(y) == 9
    assert np.all(np.isfinite(X)) and np.all(X >= 0)


_cache = {}


def _small_log():
    if "log" not in _cache:
        _cache["log"] = sl.generate_log("sparse", 60, rng=2)
    return _cache["log"]


# -- clustering and classification ---------------------------------------------------------------


def test_cluster_too_early():
    with pytest.raises(TooEarly):
        sl.cluster_over_time(_small_log(), 6)


def test_cluster_well_separated_classes():
    counts = {sl.DeviceClass.PERSONAL: (40, 40), sl.DeviceClass.FAMILY_FRIENDS: (20, 20),
              sl.DeviceClass.WELLKNOWN_STRANGER: (3, 3)}
    log = sl.generate_log("dense", 28, rng=0, weekly_counts=counts)
    res = sl.cluster_over_time(log, 28)
    assert res.truth == 3
    assert res.accuracy == 1.0


@pytest.mark.parametrize("curve, expect", [
    ([[0.9] * 4] * 4, 7),
    ([[0.9] * 4, [0.5] * 4, [0.9] * 4, [0.9] * 4], 9),
    ([[0.9] * 4, [0.9] * 4, [0.9] * 4, [0.9, 0.9, 0.7, 0.9]], None),
])
def test_cold_start_day(curve, expect):
    assert sl.cold_start_day(np.array([7, 8, 9, 10]), np.array(curve)) == expect


def test_class_metrics_hand():
    np.testing.assert_allclose(sl.class_metrics([0, 0, 1, 1], [0, 1, 1, 1], 1), [0.75, 2 / 3, 1.0, 0.8])


def test_cold_start_with_separable_classes():
    counts = {sl.DeviceClass.PERSONAL: (40, 40), sl.DeviceClass.FAMILY_FRIENDS: (20, 20),
              sl.DeviceClass.WELLKNOWN_STRANGER: (3, 3)}
    log = sl.generate_log("dense", 28, rng=0, weekly_counts=counts)
    res = sl.classify_and_coldstart(log, Kind.NAIVE_BAYES, days=[7, 14, 28], k=3)
    for c, cs in res.per_class.items():
        assert cs.cold_start == 7 and cs.accepted
        assert cs.report.f1 == pytest.approx(1.0)


def test_classify_needs_four_weeks():
    with pytest.raises(TooEarly):
        sl.classify_and_coldstart(sl.generate_log("sparse", 21, rng=0))


def test_cross_matrix_shape():
    logs = {name: sl.generate_log(name, 56, rng=4) for name in sl.TESTBEDS}
    m = sl.cross_testbed_matrix(logs, kinds=[Kind.NAIVE_BAYES],
                                features=["contact_frequency_per_week-sum", "grouping_time_per_event-mean"], k=3)
    assert len(m) == 9
    for a in logs:
        assert m[a, a].train == m[a, a].test == a
        for b in logs:
            assert 0.0 <= m[a, b].score <= 1.0
