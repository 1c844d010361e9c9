"""Artificial device-association logs and the semantic analysis built on them.

A log records, from one owner device's point of view, who it was grouped
with, when and for how long. Devices belong to a semantic class (personal,
family & friends, well-known & stranger) whose calendar rules decide when
encounters may start. From the log we derive per-device feature sets, count
clusters over time and classify devices, tracking when predictions first
become reliable (the cold start).
"""
from __future__ import annotations

import csv
import datetime as dt
import zlib
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import TooEarly, UnknownDevice
from .mlkit import CountMethod, Dataset, EvalReport, Kind, cluster_count_estimate, kfold_cv, make_model
from .mlkit.evaluation import binary_auc

OWNER = "owner"
MINUTES_PER_DAY = 1440
COLD_THRESHOLD = 0.8
COLD_LIMIT_DAYS = 91
DEFAULT_START = dt.date(2024, 1, 1)  # a Monday
DEFAULT_HOLIDAYS = ((1, 1), (1, 6), (5, 1), (8, 15), (10, 3), (11, 1), (12, 24), (12, 25), (12, 26), (12, 31))


class DayKind(str, Enum):
    ALL = "all"
    HOLIDAY = "holiday"
    WEEKEND = "weekend"
    WORKDAY = "workday"


class Slot(Enum):
    ALL = (0, 24)
    NIGHT_MORNING = (0, 5)
    MORNING = (5, 10)
    FORENOON = (10, 12)
    NOON = (12, 14)
    AFTERNOON = (14, 17)
    EVENING = (17, 21)
    EVENING_NIGHT = (21, 24)

    @property
    def hours(self) -> tuple[int, int]:
        return self.value


@dataclass(frozen=True)
class CalendarSlot:
    slot: Slot
    day_kind: DayKind = DayKind.ALL

    def matches(self, kind: DayKind) -> bool:
        return self.day_kind is DayKind.ALL or self.day_kind is kind

    def __str__(self) -> str:
        return f"{self.slot.name.lower()}[{self.day_kind.value}]"


class DeviceClass(IntEnum):
    PERSONAL = 0
    FAMILY_FRIENDS = 1
    WELLKNOWN_STRANGER = 2


_CLOSE = (
    CalendarSlot(Slot.MORNING, DayKind.WORKDAY),
    CalendarSlot(Slot.EVENING, DayKind.WORKDAY),
    CalendarSlot(Slot.NOON),
    CalendarSlot(Slot.AFTERNOON),
    CalendarSlot(Slot.EVENING),
)
RULES = {
    DeviceClass.PERSONAL: _CLOSE,
    DeviceClass.FAMILY_FRIENDS: _CLOSE,
    DeviceClass.WELLKNOWN_STRANGER: (CalendarSlot(Slot.ALL),),
}
# Own devices meet the owner most often; identical ranges would make the two close classes indistinguishable.
WEEKLY_COUNTS = {
    DeviceClass.PERSONAL: (7, 14),
    DeviceClass.FAMILY_FRIENDS: (3, 10),
    DeviceClass.WELLKNOWN_STRANGER: (1, 5),
}
SINGLE_GROUPS = tuple((c,) for c in DeviceClass)
MIXTURE_GROUPS = tuple(g for r in (1, 2, 3) for g in combinations(DeviceClass, r))


@dataclass(frozen=True)
class TestbedSpec:
    name: str
    devices_per_group: int
    duration_range_min: tuple[int, int]


TESTBEDS = {
    "sparse": TestbedSpec("sparse", 3, (10, 60)),
    "medium": TestbedSpec("medium", 6, (20, 120)),
    "dense": TestbedSpec("dense", 9, (30, 180)),
}


def testbed(name) -> TestbedSpec:
    if isinstance(name, TestbedSpec):
        return name
    try:
        return TESTBEDS[str(name).lower()]
    except KeyError:
        raise ValueError(f"unknown testbed {name!r}; choose from {sorted(TESTBEDS)}") from None


@dataclass(frozen=True, order=True)
class AssociationLogEntry:
    start: dt.datetime
    duration_min: float
    device_ids: frozenset = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "device_ids", frozenset(self.device_ids))
        if not self.duration_min > 0:
            raise ValueError("durations must be positive")

    @property
    def key(self) -> tuple:
        return self.start, self.duration_min, tuple(sorted(self.device_ids))


@dataclass
class AssociationLog:
    entries: tuple[AssociationLogEntry, ...]
    groups: dict  # device id -> tuple of DeviceClass (one class, or several for a mixture)
    testbed: TestbedSpec
    days: int
    start_date: dt.date = DEFAULT_START
    holidays: tuple = DEFAULT_HOLIDAYS

    @property
    def devices(self) -> list[str]:
        return sorted(self.groups)

    @property
    def group_kinds(self) -> list[tuple]:
        return sorted(set(self.groups.values()))

    def label(self, device: str) -> int:
        """Class index of a device among the log's distinct groups."""
        return self.group_kinds.index(self.groups[device])

    def labels(self) -> np.ndarray:
        kinds = self.group_kinds
        return np.array([kinds.index(self.groups[d]) for d in self.devices])


def day_kind(day: dt.date, holidays: Iterable = DEFAULT_HOLIDAYS) -> DayKind:
    if (day.month, day.day) in set(holidays):
        return DayKind.HOLIDAY
    if day.weekday() >= 5:
        return DayKind.WEEKEND
    return DayKind.WORKDAY


def allowed_minutes(rules: Sequence[CalendarSlot], kind: DayKind) -> list[tuple[int, int]]:
    """Merged half-open minute intervals of the day in which an encounter may start."""
    spans = sorted((r.slot.hours[0] * 60, r.slot.hours[1] * 60) for r in rules if r.matches(kind))
    merged: list[list[int]] = []
    for a, b in spans:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def complies(start: dt.datetime, rules: Sequence[CalendarSlot], holidays: Iterable = DEFAULT_HOLIDAYS) -> bool:
    m = start.hour * 60 + start.minute
    return any(a <= m < b for a, b in allowed_minutes(rules, day_kind(start.date(), holidays)))


def group_rules(group: Sequence[DeviceClass]) -> tuple[CalendarSlot, ...]:
    """Rules of a (possibly mixed) device group: the union of its classes' rules."""
    out: list[CalendarSlot] = []
    for c in group:
        out += [r for r in RULES[DeviceClass(c)] if r not in out]
    return tuple(out)


def clean_log(entries: Iterable[AssociationLogEntry]) -> tuple[AssociationLogEntry, ...]:
    """Drop entries with fewer than two devices and exact duplicates; sorted by start."""
    seen, out = set(), []
    for e in entries:
        if len(e.device_ids) < 2 or e.key in seen:
            continue
        seen.add(e.key)
        out.append(e)
    return tuple(sorted(out, key=lambda e: e.key))


def _device_id(group: Sequence[DeviceClass], i: int) -> str:
    return "+".join(DeviceClass(c).name.lower() for c in group) + f"-{i:02d}"


def _stream(seed, *keys) -> np.random.Generator:
    words = [int(seed) & 0xFFFFFFFF] + [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(words))


def generate_log(spec, days: int = 365, rng=None, mixtures: bool = False, weekly_counts: Optional[dict] = None,
                 holidays: Sequence = DEFAULT_HOLIDAYS, start_date: dt.date = DEFAULT_START) -> AssociationLog:
    """Encounters of every device with the owner over ``days`` days.

    Each device draws a weekly encounter count uniformly from its class range
    (mixed groups add up the draws of their classes). Start minutes are
    uniform over the minutes its rules allow in that week and durations are
    uniform over the testbed range. Weeks start on Monday. A device uses its
    own random stream week by week, so a longer log extends a shorter one.
    """
    spec = testbed(spec)
    if days < 7:
        raise TooEarly("a log covers at least one week")
    seed = int(rng) if isinstance(rng, (int, np.integer)) else int(np.random.default_rng(rng).integers(2**31))
    counts = {**WEEKLY_COUNTS, **{DeviceClass(c): v for c, v in (weekly_counts or {}).items()}}
    groups = MIXTURE_GROUPS if mixtures else SINGLE_GROUPS
    lo_d, hi_d = spec.duration_range_min
    dates = [start_date + dt.timedelta(days=i) for i in range(days)]
    kinds = [day_kind(d, holidays) for d in dates]
    lead = start_date.weekday()
    n_weeks = (days + lead + 6) // 7
    entries, labels = [], {}
    for group in groups:
        rules = group_rules(group)
        allowed = {k: allowed_minutes(rules, k) for k in (DayKind.HOLIDAY, DayKind.WEEKEND, DayKind.WORKDAY)}
        for i in range(spec.devices_per_group):
            dev = _device_id(group, i)
            labels[dev] = tuple(DeviceClass(c) for c in group)
            r = _stream(seed, dev)
            for w in range(n_weeks):
                # minutes available in this calendar week, as (day index, start, stop)
                spans = [(d, a, b) for d in range(7 * w - lead, 7 * w - lead + 7)
                         for a, b in allowed[kinds[d] if 0 <= d < days else DayKind.WORKDAY]]
                sizes = np.array([b - a for _, a, b in spans])
                cum = np.cumsum(sizes)
                n = sum(int(r.integers(counts[c][0], counts[c][1] + 1)) for c in group)
                u = r.integers(0, cum[-1], n)
                durations = r.integers(lo_d, hi_d + 1, n)
                for x, dur in zip(u, durations):
                    k = int(np.searchsorted(cum, x, side="right"))
                    d, a, _ = spans[k]
                    if not 0 <= d < days:
                        continue
                    minute = a + int(x - (cum[k] - sizes[k]))
                    start = dt.datetime.combine(dates[d], dt.time()) + dt.timedelta(minutes=minute)
                    entries.append(AssociationLogEntry(start, float(dur), frozenset({OWNER, dev})))
    return AssociationLog(clean_log(entries), labels, spec, days, start_date, tuple(holidays))


def write_log_csv(log: AssociationLog | Sequence[AssociationLogEntry], path) -> None:
    entries = log.entries if isinstance(log, AssociationLog) else log
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start_iso8601", "duration_min", "device_ids"])
        for e in entries:
            w.writerow([e.start.isoformat(), f"{e.duration_min:g}", ";".join(sorted(e.device_ids))])


def read_log_csv(path) -> list[AssociationLogEntry]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [AssociationLogEntry(dt.datetime.fromisoformat(r["start_iso8601"]), float(r["duration_min"]),
                                frozenset(r["device_ids"].split(";"))) for r in rows]


def log_from_entries(entries: Sequence[AssociationLogEntry], spec="dense", days: Optional[int] = None,
                     start_date: Optional[dt.date] = None) -> AssociationLog:
    """Rebuild a log from entries, taking device groups from the device ids."""
    entries = clean_log(entries)
    if start_date is None:
        start_date = min(e.start.date() for e in entries)
        start_date -= dt.timedelta(days=start_date.weekday())
    if days is None:
        days = (max(e.start.date() for e in entries) - start_date).days + 1
    groups = {}
    for e in entries:
        for d in e.device_ids - {OWNER}:
            groups[d] = tuple(DeviceClass[n.upper()] for n in d.rsplit("-", 1)[0].split("+"))
    return AssociationLog(entries, groups, testbed(spec), days, start_date)


# -- features ---------------------------------------------------------------------------------

BASES = (
    "grouping_time_per_event",
    "grouping_time_per_day",
    "grouping_time_per_week",
    "contact_frequency_per_day",
    "contact_frequency_per_week",
    "time_ratio_per_day",
    "time_ratio_per_week",
)
AGGREGATES = ("sum", "mean", "std", "min", "max")
WINDOWS_DAYS = (7, 28, None)
COMBINED = "combined"
FEATURE_SET_NAMES = BASES + tuple(f"{b}-{a}" for b in BASES for a in AGGREGATES) + (COMBINED,)
# (base, statistic) pairs of the ten-dimensional combined set, over the whole history
_COMBINED_PARTS = tuple((b, s) for b in ("grouping_time_per_event", "grouping_time_per_day",
                                         "grouping_time_per_week", "contact_frequency_per_week",
                                         "time_ratio_per_week") for s in ("mean", "std"))
_STATS = ("typical",) + AGGREGATES


def _stats(x: np.ndarray) -> list[float]:
    if len(x) == 0:
        return [0.0] * 6
    return [float(np.median(x)), float(x.sum()), float(x.mean()), float(x.std()), float(x.min()), float(x.max())]


def _weekly(daily: np.ndarray, lo: int, t: int) -> np.ndarray:
    """Sums over 7-day blocks counted back from ``t`` (one partial block if less than a week)."""
    n = (t - lo) // 7
    if n == 0:
        return np.array([daily[lo:t].sum()])
    return daily[t - 7 * n:t].reshape(n, 7).sum(axis=1)


class _Series:
    def __init__(self, log: AssociationLog):
        self.log = log
        self._cache: dict = {}
        self.index = {d: i for i, d in enumerate(log.devices)}
        n = len(self.index)
        self.ev_day: list[list[int]] = [[] for _ in range(n)]
        self.ev_dur: list[list[float]] = [[] for _ in range(n)]
        for e in log.entries:
            day = (e.start.date() - log.start_date).days
            for d in e.device_ids - {OWNER}:
                if d in self.index:
                    self.ev_day[self.index[d]].append(day)
                    self.ev_dur[self.index[d]].append(e.duration_min)
        self.ev_day_a = [np.asarray(x, dtype=np.int64) for x in self.ev_day]
        self.ev_dur_a = [np.asarray(x, dtype=float) for x in self.ev_dur]
        size = max(log.days, 1 + max((max(x) for x in self.ev_day if x), default=0))
        self.daily_min = np.zeros((n, size))
        self.daily_cnt = np.zeros((n, size))
        for i in range(n):
            ok = self.ev_day_a[i] >= 0
            np.add.at(self.daily_min[i], self.ev_day_a[i][ok], self.ev_dur_a[i][ok])
            np.add.at(self.daily_cnt[i], self.ev_day_a[i][ok], 1.0)

    def tensor(self, i: int, t: int) -> np.ndarray:
        """(base, statistic, window) values for device ``i`` using days [0, t)."""
        if (i, t) not in self._cache:
            self._cache[i, t] = self._tensor(i, t)
        return self._cache[i, t]

    def _tensor(self, i: int, t: int) -> np.ndarray:
        out = np.zeros((len(BASES), len(_STATS), len(WINDOWS_DAYS)))
        for w, span in enumerate(WINDOWS_DAYS):
            lo = 0 if span is None else max(0, t - span)
            m = (self.ev_day_a[i] >= lo) & (self.ev_day_a[i] < t)
            dmin, dcnt = self.daily_min[i, lo:t], self.daily_cnt[i, lo:t]
            wmin, wcnt = _weekly(self.daily_min[i], lo, t), _weekly(self.daily_cnt[i], lo, t)
            series = (self.ev_dur_a[i][m], dmin, wmin, dcnt, wcnt, dmin / MINUTES_PER_DAY,
                      wmin / (7 * MINUTES_PER_DAY))
            for b, x in enumerate(series):
                out[b, :, w] = _stats(x)
        return out


def _feature(tensor: np.ndarray, name: str) -> np.ndarray:
    if name == COMBINED:
        return np.array([tensor[BASES.index(b), _STATS.index(s), -1] for b, s in _COMBINED_PARTS])
    base, _, agg = name.partition("-")
    if base not in BASES or (agg and agg not in AGGREGATES):
        raise KeyError(f"unknown feature set {name!r}")
    return tensor[BASES.index(base), _STATS.index(agg or "typical")].copy()


def extract_feature_sets(log: AssociationLog, device: str, t_days: Optional[int] = None,
                         series: Optional[_Series] = None) -> dict[str, np.ndarray]:
    """All 43 feature sets of ``device`` from the first ``t_days`` days of the log.

    Base sets hold the typical (median) value of the series; aggregate sets
    its sum, mean, std, min or max. Either is evaluated over the trailing
    week, the trailing four weeks and the whole history.
    """
    series = series or _Series(log)
    if device not in series.index:
        raise UnknownDevice(device)
    t = log.days if t_days is None else int(t_days)
    tensor = series.tensor(series.index[device], t)
    return {name: _feature(tensor, name) for name in FEATURE_SET_NAMES}


def feature_matrix(log: AssociationLog, name: str, t_days: Optional[int] = None,
                   series: Optional[_Series] = None) -> tuple[np.ndarray, np.ndarray]:
    """(X, y): one row per device of one feature set, labels from the device groups."""
    series = series or _Series(log)
    t = log.days if t_days is None else int(t_days)
    X = np.array([_feature(series.tensor(i, t), name) for i in range(len(series.index))])
    return X, log.labels()


# -- clustering over time -----------------------------------------------------------------------


WINDOW_NAMES = ("1w", "4w", "all")


@dataclass(frozen=True)
class ClusterAccuracy:
    t_days: int
    truth: int
    estimates: dict
    accuracy: float


def cluster_over_time(log: AssociationLog, t_days: int, methods: Sequence[CountMethod] = tuple(CountMethod),
                      feature: str = "contact_frequency_per_week-sum", rng=None, window: Optional[str] = "all",
                      series: Optional[_Series] = None) -> ClusterAccuracy:
    """Share of cluster-count methods that find the true number of device groups at day ``t_days``.

    Devices are clustered on one window of the feature set (``window`` in
    1w/4w/all, or None for all three); the combined set is used whole. Each
    dimension is standardised first.
    """
    if t_days < 7:
        raise TooEarly("clustering needs at least one week of log")
    X, _ = feature_matrix(log, feature, t_days, series)
    if feature != COMBINED and window is not None:
        X = X[:, [WINDOW_NAMES.index(window)]]
    sd = X.std(axis=0)
    X = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    truth = len(log.group_kinds)
    k_max = min(9, len(X) - 1)
    est = {}
    for m in methods:
        seed = _stream(0 if rng is None else int(rng), "cluster", t_days, CountMethod(m).value)
        est[CountMethod(m)] = cluster_count_estimate(X, m, (2, k_max), seed).k
    acc = float(np.mean([k == truth for k in est.values()]))
    return ClusterAccuracy(int(t_days), truth, est, acc)


def clustering_study(log: AssociationLog, days: Sequence[int], features: Sequence[str] = FEATURE_SET_NAMES,
                     top: int = 3, rng=None, **kw) -> dict:
    """Accuracy curves per feature set; returns the ``top`` sets by mean accuracy, best first."""
    series = _Series(log)
    curves = {f: np.array([cluster_over_time(log, t, feature=f, rng=rng, series=series, **kw).accuracy
                           for t in days]) for f in features}
    ranked = sorted(curves, key=lambda f: (-curves[f].mean(), FEATURE_SET_NAMES.index(f)))
    return {f: curves[f] for f in ranked[:top]}


# -- classification and cold start --------------------------------------------------------------

CLASSIFIERS = (Kind.EXTRA_TREES, Kind.GRADIENT_BOOSTING, Kind.LINEAR_SVM, Kind.RANDOM_FOREST, Kind.NAIVE_BAYES,
               Kind.ADA_BOOST)
METRICS = ("accuracy", "precision", "recall", "f1")


def class_metrics(y_true, y_pred, positive) -> np.ndarray:
    """One-vs-rest accuracy, precision, recall and F1 of class ``positive``."""
    t, p = np.asarray(y_true) == positive, np.asarray(y_pred) == positive
    tp = float(np.sum(t & p))
    prec = tp / p.sum() if p.sum() else 0.0
    rec = tp / t.sum() if t.sum() else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return np.array([float(np.mean(t == p)), prec, rec, f1])


def cold_start_day(days: Sequence[int], curve: np.ndarray, threshold: float = COLD_THRESHOLD) -> Optional[int]:
    """First day from which every later row of ``curve`` (days x metrics) stays at or above the threshold."""
    ok = np.all(np.asarray(curve) >= threshold, axis=1)
    if not len(ok) or not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    return int(days[0] if not len(bad) else days[bad[-1] + 1])


@dataclass
class ColdStart:
    device_class: int
    cold_start: Optional[int]
    report: EvalReport

    @property
    def never_cold(self) -> bool:
        return self.cold_start is None

    @property
    def accepted(self) -> bool:
        return self.cold_start is not None and self.cold_start <= COLD_LIMIT_DAYS


@dataclass
class ColdStartResult:
    kind: Kind
    feature: str
    days: np.ndarray
    curves: dict  # class -> (days x 4) one-vs-rest metrics
    auc: dict  # class -> per-day AUC
    per_class: dict  # class -> ColdStart


def _daily_cv(log, series, kind, feature, t, k, seed, hyperparams):
    X, y = feature_matrix(log, feature, t, series)
    rep = kfold_cv(kind, Dataset(X, y), k, _stream(seed, "cv", t), hyperparams, pooled=True)
    return y, rep.extra["oof"], rep.extra["oof_proba"], rep.extra["classes"]


def classify_and_coldstart(log: AssociationLog, kind=Kind.NAIVE_BAYES, feature: str = "contact_frequency_per_week-sum",
                           days: Optional[Sequence[int]] = None, stride: int = 1, k: int = 10, seed: int = 0,
                           threshold: float = COLD_THRESHOLD, hyperparams: Optional[dict] = None,
                           series: Optional[_Series] = None) -> ColdStartResult:
    """Cumulative daily k-fold evaluation and per-class cold start.

    On every evaluation day the devices are described with the log up to
    that day and classified with stratified k-fold cross-validation. The
    cold start of a class is the first day from which its accuracy,
    precision, recall and F1 all stay at or above ``threshold``. The report
    of a class averages the metrics from its cold start on (or over all days
    when it never gets there).
    """
    if log.days < 28:
        raise TooEarly("classification needs at least four weeks of log")
    kind = Kind(kind)
    series = series or _Series(log)
    days = np.arange(7, log.days + 1, stride) if days is None else np.asarray(days)
    classes = range(len(log.group_kinds))
    curves = {c: np.zeros((len(days), 4)) for c in classes}
    auc = {c: np.full(len(days), np.nan) for c in classes}
    for j, t in enumerate(days):
        y, oof, proba, labels = _daily_cv(log, series, kind, feature, int(t), k, seed, hyperparams)
        for c in classes:
            curves[c][j] = class_metrics(y, oof, c)
            col = np.searchsorted(labels, c)
            auc[c][j] = binary_auc(proba[:, col], y == c)
    per_class = {}
    for c in classes:
        cs = cold_start_day(days, curves[c], threshold)
        rows = days >= cs if cs is not None else np.ones(len(days), bool)
        m = curves[c][rows].mean(axis=0)
        a = auc[c][rows]
        per_class[c] = ColdStart(c, cs, EvalReport(*m, auc=float(np.nanmean(a)) if np.any(~np.isnan(a)) else np.nan))
    return ColdStartResult(kind, feature, days, curves, auc, per_class)


def best_per_class(log: AssociationLog, kinds: Sequence = CLASSIFIERS, features: Sequence[str] = FEATURE_SET_NAMES,
                   **kw) -> dict:
    """Per class, the accepted (classifier, feature) with the earliest cold start (ties: higher F1)."""
    series = _Series(log)
    best: dict = {}
    for kind in kinds:
        for feat in features:
            res = classify_and_coldstart(log, kind, feat, series=series, **kw)
            for c, cs in res.per_class.items():
                if not cs.accepted:
                    continue
                key = (cs.cold_start, -cs.report.f1)
                if c not in best or key < best[c][0]:
                    best[c] = (key, Kind(kind), feat, cs)
    return {c: v[1:] for c, v in best.items()}


# -- across testbeds ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossResult:
    train: str
    test: str
    kind: Kind
    feature: str
    score: float
    report: EvalReport


def _mean_class_accuracy(y, pred) -> float:
    return float(np.mean([class_metrics(y, pred, c)[0] for c in np.unique(y)]))


def cross_testbed(train_log: AssociationLog, test_log: AssociationLog, kinds: Sequence = CLASSIFIERS,
                  features: Sequence[str] = FEATURE_SET_NAMES, t_days: Optional[int] = None, k: int = 10,
                  seed: int = 0) -> CrossResult:
    """Best (classifier, feature) for predicting the test testbed's classes after training on another.

    With the same log on both sides the score comes from k-fold
    cross-validation; otherwise the model is fit on the training log and
    applied to every device of the test log. Candidates are ranked by their
    accuracy averaged over the device classes.
    """
    t = min(train_log.days, test_log.days) if t_days is None else int(t_days)
    same = train_log is test_log
    s_train, s_test = _Series(train_log), (None if same else _Series(test_log))
    best = None
    for kind in kinds:
        for feat in features:
            if same:
                y, pred, _, _ = _daily_cv(train_log, s_train, Kind(kind), feat, t, k, seed, None)
            else:
                Xa, ya = feature_matrix(train_log, feat, t, s_train)
                Xb, y = feature_matrix(test_log, feat, t, s_test)
                pred = make_model(kind, rng=_stream(seed, "cross", feat)).fit(Xa, ya).predict(Xb)
            score = _mean_class_accuracy(y, pred)
            if best is None or score > best[0]:
                ms = np.array([class_metrics(y, pred, c) for c in np.unique(y)]).mean(axis=0)
                best = (score, Kind(kind), feat, EvalReport(float(np.mean(pred == y)), *ms[1:]))
    score, kind, feat, rep = best
    return CrossResult(train_log.testbed.name, test_log.testbed.name, kind, feat, score, rep)


def cross_testbed_matrix(logs: dict, **kw) -> dict:
    """(train, test) -> CrossResult for every pair of the given testbed logs."""
    return {(a, b): cross_testbed(logs[a], logs[b], **kw) for a in logs for b in logs}
