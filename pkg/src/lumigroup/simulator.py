"""Static and dynamic grouping simulations with emulated latency and ground truth.

Static runs keep every user in one room. Each round splits the users into
one to three co-located subsets, each lit by its own random pattern, and
groups them device-to-device. Dynamic runs move users between rooms along
random paths and bind them to rooms (device-to-area) every grouping period.

Each grouping technique is a (grouping technique, feature type) cell. All
cells see the same captures, so differences between cells (and between
grouping periods) are not blurred by sampling noise.
"""
from __future__ import annotations

import math
import time
import zlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import fingerprint as fp
from .cycledetect import extract_period_list, fold_to_pattern
from .errors import ConfigInvalid, FlatSignal, EmptySignal, NoRepetition, UniverseMismatch
from .groupengine import (
    Bulb,
    EngineConfig,
    GroupingEngine,
    InProcessTransport,
    Message,
    Mode,
    MsgType,
    Router,
    decode_scan,
    decode_signal,
    encode_scan,
    encode_signal,
    frame,
)
from .lightsig import ALLOWED_LENGTHS, NOISE_STD_MV, LightPattern, RawLightSignal, generate_pattern, synthesize_signal
from .mlkit import EvalReport, Kind, make_model
from .mlkit.evaluation import confusion_matrix
from .simmetrics import Equalizer, Metric, SimilarityConfig, score_pair
from .tsfeatures import STATISTICAL_NAMES, rank_features, statistical_features, ts_feature_library

SPEED_RANGE = (1.25, 1.53)
VISIT_RANGE = (3, 8)
ROOM_SPACING_M = 3.0
CORRIDOR = "corridor"
CORRIDOR_LEVEL_MV = 300.0
CORRIDOR_WINDOW_MS = 50.0
SCAN_WINDOW_S = 5
# rank noise inside each light level caps Spearman on raw signals near 0.75
SIMILARITY_THRESHOLDS = {"pearson": 0.9, "spearman": 0.8}
REPORT_COLUMNS = ("technique", "feature_type", "overall", "runtime_s", "accuracy", "precision", "recall", "f1")


class SimMode(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class ScenarioConfig:
    mode: SimMode = SimMode.STATIC
    users: int = 5
    rooms: int = 1
    pattern_lengths: tuple[int, ...] = ALLOWED_LENGTHS
    grouping_period_s: float = 20
    iteration_s: float = 1200
    latency_range_ms: tuple[float, float] = (50.0, 500.0)
    seed: int = 0
    rounds: int = 10
    window_ratio: tuple[float, float] = (2.5, 4.0)
    window_ms: Optional[tuple[float, float]] = None
    compute_s: float = 0.17
    techniques: Optional[tuple[tuple[str, str], ...]] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", SimMode(self.mode))
        except ValueError:
            raise ConfigInvalid(f"unknown mode {self.mode!r}") from None
        object.__setattr__(self, "pattern_lengths", tuple(sorted(set(int(x) for x in self.pattern_lengths))))
        object.__setattr__(self, "latency_range_ms", tuple(float(x) for x in self.latency_range_ms))
        if self.techniques is not None:
            object.__setattr__(self, "techniques", tuple((str(a), str(b)) for a, b in self.techniques))
        self.validate()

    def validate(self) -> None:
        if self.mode is SimMode.STATIC:
            if not 2 <= self.users <= 10:
                raise ConfigInvalid(f"static runs need 2..10 users, got {self.users}")
            if self.rooms != 1:
                raise ConfigInvalid("static runs use exactly one room")
            if self.rounds < 1:
                raise ConfigInvalid("need at least one round")
        else:
            if self.users not in (3, 5, 10):
                raise ConfigInvalid(f"dynamic runs need 3, 5 or 10 users, got {self.users}")
            if not 1 <= self.rooms <= 10:
                raise ConfigInvalid(f"dynamic runs need 1..10 rooms, got {self.rooms}")
            if self.grouping_period_s not in (10, 20, 30):
                raise ConfigInvalid(f"grouping period must be 10, 20 or 30 s, got {self.grouping_period_s}")
            if not self.iteration_s > 0:
                raise ConfigInvalid("iteration must be positive")
        if not self.pattern_lengths or not set(self.pattern_lengths) <= set(ALLOWED_LENGTHS):
            raise ConfigInvalid(f"pattern lengths must come from {ALLOWED_LENGTHS}")
        lo, hi = self.latency_range_ms
        if not 0 <= lo <= hi:
            raise ConfigInvalid("latency range must satisfy 0 <= low <= high")
        a, b = self.window_ratio
        if not 1.0 <= a <= b:
            raise ConfigInvalid("window ratio must satisfy 1 <= low <= high")
        if self.window_ms is not None and not 0 < self.window_ms[0] <= self.window_ms[1]:
            raise ConfigInvalid("window range must satisfy 0 < low <= high")
        if self.techniques is not None:
            unknown = set(self.techniques) - set(ALL_TECHNIQUES)
            if unknown:
                raise ConfigInvalid(f"unknown techniques {sorted(unknown)}")


def _stream(seed: int, *keys) -> np.random.Generator:
    """Independent generator per (seed, key path); string keys are hashed stably."""
    words = [int(seed) & 0xFFFFFFFF]
    for k in keys:
        words.append(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))


# -- layout and mobility ----------------------------------------------------------------


@dataclass(frozen=True)
class Layout:
    centers: np.ndarray
    distances: np.ndarray

    @property
    def n_rooms(self) -> int:
        return len(self.centers)


def build_layout(n_rooms: int, spacing_m: float = ROOM_SPACING_M) -> Layout:
    """Room centres on a two-row grid with the pairwise distance matrix."""
    if not 1 <= n_rooms <= 10:
        raise ConfigInvalid(f"layout supports 1..10 rooms, got {n_rooms}")
    c = fp.grid_layout(n_rooms, spacing_m)
    d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
    return Layout(c, d)


@dataclass(frozen=True)
class MobilityPath:
    visits: tuple[tuple[int, float], ...]  # (room, dwell_s)
    speeds: tuple[float, ...] = ()  # one per transition
    transits: tuple[float, ...] = ()  # seconds in the corridor per transition

    def __post_init__(self):
        if not self.visits:
            raise ValueError("a path needs at least one visit")
        if any(d <= 0 for _, d in self.visits):
            raise ValueError("dwell times must be positive")
        if not len(self.speeds) == len(self.transits) == len(self.visits) - 1:
            raise ValueError("need one speed and transit time per transition")
        if any(not SPEED_RANGE[0] <= s <= SPEED_RANGE[1] for s in self.speeds):
            raise ValueError(f"speeds must lie in {SPEED_RANGE}")

    @property
    def total_s(self) -> float:
        return sum(d for _, d in self.visits) + sum(self.transits)

    def segments(self) -> list[tuple[float, float, Optional[int], int, int]]:
        """(t0, t1, room or None for corridor, from_visit, to_visit) covering the path."""
        out, t = [], 0.0
        for i, (room, dwell) in enumerate(self.visits):
            out.append((t, t + dwell, room, i, i))
            t += dwell
            if i < len(self.transits):
                out.append((t, t + self.transits[i], None, i, i + 1))
                t += self.transits[i]
        return out

    def room_at(self, t: float) -> Optional[int]:
        for t0, t1, room, _, _ in self.segments():
            if t0 <= t < t1:
                return room
        return self.visits[-1][0]


def random_path(iteration_s: float, layout: Layout | int, rng=None) -> MobilityPath:
    """Random room sequence with multinomial dwell times and walking transits.

    The visit count is uniform in [3, 8] and rooms never repeat back to back.
    Walking time (distance / speed) comes off the budget first; the rest is
    split in whole seconds by a multinomial draw, with the fractional
    remainder added to the last stay so the path covers the iteration exactly.
    """
    if not iteration_s > 0:
        raise ConfigInvalid("iteration must be positive")
    layout = build_layout(layout) if isinstance(layout, int) else layout
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n = layout.n_rooms
    if n == 1:
        return MobilityPath(((0, float(iteration_s)),))
    k = int(rng.integers(VISIT_RANGE[0], VISIT_RANGE[1] + 1))
    rooms = [int(rng.integers(n))]
    for _ in range(k - 1):
        r = int(rng.integers(n - 1))
        rooms.append(r + (r >= rooms[-1]))
    speeds = tuple(float(rng.uniform(*SPEED_RANGE)) for _ in range(k - 1))
    transits = tuple(float(layout.distances[a, b] / s) for a, b, s in zip(rooms, rooms[1:], speeds))
    budget = iteration_s - sum(transits)
    whole = int(math.floor(budget))
    if whole < k:
        raise ConfigInvalid("iteration too short for the walking time")
    dwell = 1 + rng.multinomial(whole - k, np.full(k, 1.0 / k)).astype(float)
    dwell[-1] += budget - whole
    return MobilityPath(tuple(zip(rooms, dwell.tolist())), speeds, transits)


# -- captures ---------------------------------------------------------------------------


@dataclass
class Capture:
    """What one client sends for one grouping round."""

    client_id: str
    signal: RawLightSignal
    wifi: fp.RadioScan
    bluetooth: fp.RadioScan
    latency_s: float
    window_ms: float

    def frames(self) -> list[bytes]:
        return [
            frame(Message(MsgType.RAW_LIGHT_SIGNAL, encode_signal(self.signal.voltage_mv, self.signal.sampling_interval_us))),
            frame(Message(MsgType.WIFI_SCAN, encode_scan(self.wifi.observations, self.wifi.t_s))),
            frame(Message(MsgType.BLUETOOTH_SCAN, encode_scan(self.bluetooth.observations, self.bluetooth.t_s))),
        ]


def _window(pattern: LightPattern, cfg: ScenarioConfig, rng) -> float:
    if cfg.window_ms is not None:
        return float(rng.uniform(*cfg.window_ms))
    return pattern.duration_ms * float(rng.uniform(*cfg.window_ratio))


def _light(pattern: Optional[LightPattern], cfg: ScenarioConfig, rng) -> RawLightSignal:
    if pattern is None:
        n = int(CORRIDOR_WINDOW_MS * 1000 / 20)
        v = CORRIDOR_LEVEL_MV + rng.normal(0.0, NOISE_STD_MV, n)
        return RawLightSignal(np.arange(n, dtype=np.int64) * 20, v, 20)
    return synthesize_signal(pattern, _window(pattern, cfg, rng), _offset(pattern, rng), rng=rng)


def _offset(pattern: LightPattern, rng) -> float:
    # whole microseconds, so rounding can never reach the period itself
    return math.floor(rng.uniform(0.0, pattern.duration_ms) * 1000.0) / 1000.0


def _scan_window(envs: dict, positions: Sequence, t_end: float, rng) -> dict:
    """One aggregated scan per radio kind from 1 Hz scans at the given positions."""
    out = {}
    for kind, env in envs.items():
        scans = [fp.scan_at(env, p, t_end - (len(positions) - 1 - i), rng) for i, p in enumerate(positions)]
        obs = fp.aggregate_scans(scans)
        out[kind] = fp.RadioScan(kind, float(t_end), tuple(sorted(obs.items())))
    return out


# -- techniques -------------------------------------------------------------------------

SIMILARITY_TECHNIQUES = tuple((m, f) for m in ("pearson", "spearman")
                              for f in ("light_signal", "light_pattern", "pattern_durations"))
ML_TECHNIQUES = tuple((m, f) for m in ("random_forest", "extra_trees", "gradient_boosting")
                      for f in ("statistical", "selected_statistical", "selected_tsfresh"))
LOCALIZATION_TECHNIQUES = tuple((m, f) for m in ("content_based_filtering", "svm", "random_forest")
                                for f in ("wifi", "bluetooth"))
ALL_TECHNIQUES = SIMILARITY_TECHNIQUES + ML_TECHNIQUES + LOCALIZATION_TECHNIQUES
TRAIN_WINDOWS = 20
CALIBRATION_PAIRS = 40


def _render(p: LightPattern) -> np.ndarray:
    return synthesize_signal(p, 2 * p.duration_ms, 0.0, noise_std=0.0).voltage_mv


def _extract(v: np.ndarray) -> Optional[LightPattern]:
    n = len(v)
    try:
        return fold_to_pattern(extract_period_list(RawLightSignal(np.arange(n, dtype=np.int64) * 20, v, 20)))
    except (NoRepetition, FlatSignal, EmptySignal, ValueError):
        return None


def _duration_score(a, b, cfg: SimilarityConfig) -> float:
    if a is None or b is None or len(a) != len(b):
        return 0.0
    da, db = np.asarray(a.durations_ms), np.asarray(b.durations_ms)
    return max(score_pair(np.roll(da, -k), db, cfg)[0] for k in range(0, len(da), 2))


class Technique:
    """One grouping cell; subclasses turn received data into payloads and score them."""

    msg_type = MsgType.RAW_LIGHT_SIGNAL
    threshold = 0.5

    def __init__(self, name: str, feature_type: str):
        self.name, self.feature_type = name, feature_type

    @property
    def key(self) -> tuple[str, str]:
        return self.name, self.feature_type

    def fit(self, ctx: dict, rng) -> None:
        pass

    def payload(self, received: dict):
        raise NotImplementedError

    def score(self, a, b) -> float:
        return float(a == b)

    def references(self, ctx: dict) -> dict:
        return {fp.room_name(r): fp.room_name(r) for r in range(len(ctx["patterns"]))}


class SimilarityTechnique(Technique):
    def __init__(self, name, feature_type, threshold: Optional[float] = None):
        super().__init__(name, feature_type)
        self.threshold = SIMILARITY_THRESHOLDS[name] if threshold is None else threshold
        metric = Metric.PEARSON if name == "pearson" else Metric.SPEARMAN
        eq = Equalizer.FILL if feature_type == "pattern_durations" else Equalizer.XCORR
        self.cfg = SimilarityConfig(metric, eq, self.threshold)

    def _convert(self, v: np.ndarray):
        if self.feature_type == "light_signal":
            return v
        p = _extract(v)
        if self.feature_type == "light_pattern":
            return None if p is None else _render(p)
        return p

    def payload(self, received):
        return self._convert(received[MsgType.RAW_LIGHT_SIGNAL])

    def score(self, a, b) -> float:
        if self.feature_type == "pattern_durations":
            return _duration_score(a, b, self.cfg)
        if a is None or b is None:
            return 0.0
        return score_pair(a, b, self.cfg)[0]

    def references(self, ctx):
        out = {}
        for r, p in enumerate(ctx["patterns"]):
            if self.feature_type == "light_signal":
                ref = synthesize_signal(p, 4 * p.duration_ms, 0.0, rng=ctx["ref_rng"]).voltage_mv
            elif self.feature_type == "light_pattern":
                ref = _render(p)
            else:
                ref = p
            out[fp.room_name(r)] = ref
        return out


def _features(v: np.ndarray, feature_type: str) -> np.ndarray:
    return (statistical_features(v) if feature_type != "selected_tsfresh" else ts_feature_library(v)).as_array()


class MLTechnique(Technique):
    """Pattern classifier trained on windows synthesised from the known patterns."""

    KINDS = {"random_forest": Kind.RANDOM_FOREST, "extra_trees": Kind.EXTRA_TREES,
             "gradient_boosting": Kind.GRADIENT_BOOSTING}
    TOP = {"selected_statistical": 5, "selected_tsfresh": 10}

    def fit(self, ctx, rng):
        X, y = ctx["train"][self.feature_type == "selected_tsfresh"]
        self.columns = np.arange(X.shape[1])
        names = STATISTICAL_NAMES if self.feature_type != "selected_tsfresh" else ctx["train_names"]
        self.labels = np.unique(y)
        if len(self.labels) < 2:
            self.model = None
            return
        if self.feature_type in self.TOP and len(y) >= 10:
            ranked = [n for n, _ in rank_features(X, y, names)[: self.TOP[self.feature_type]]]
            self.columns = np.array([list(names).index(n) for n in ranked])
        self.model = make_model(self.KINDS[self.name], rng=rng).fit(X[:, self.columns], y)

    def payload(self, received):
        if self.model is None:
            return self.labels[0]
        f = received.get(("features", self.feature_type == "selected_tsfresh"))
        if f is None:
            f = _features(received[MsgType.RAW_LIGHT_SIGNAL], self.feature_type)
        return self.model.predict(f[self.columns][None, :])[0]


class LocalizationTechnique(Technique):
    """Radio fingerprints: cosine matching or a classifier on pair/room features."""

    def __init__(self, name, feature_type):
        super().__init__(name, feature_type)
        self.msg_type = MsgType.WIFI_SCAN if feature_type == "wifi" else MsgType.BLUETOOTH_SCAN
        self.kind = fp.RadioKind.WIFI if feature_type == "wifi" else fp.RadioKind.BLUETOOTH
        self.threshold = 0.5

    def fit(self, ctx, rng):
        self.static = ctx["mode"] is SimMode.STATIC
        if self.name == "content_based_filtering":
            if self.static:
                cal = ctx["calibration"][self.kind]
                # midpoint between typical same-spot and different-spot similarity
                same = np.median([1 - _cos(a, b) for a, b, lab in cal if lab])
                diff = np.median([1 - _cos(a, b) for a, b, lab in cal if not lab])
                self.threshold = float((same + diff) / 2)
            else:
                self.threshold = 0.0
            return
        kind = Kind.LINEAR_SVM if self.name == "svm" else Kind.RANDOM_FOREST
        if self.static:
            cal = ctx["calibration"][self.kind]
            X = np.array([fp.pair_features(a, b).values for a, b, _ in cal])
            y = np.array([int(lab) for _, _, lab in cal])
        else:
            X, y = ctx["survey"][self.kind]
        self.model = make_model(kind, rng=rng).fit(X, y)

    def payload(self, received):
        scan = received[self.msg_type]
        if self.name == "content_based_filtering" or self.static:
            return scan
        space = self._space
        return self.model.predict(fp.scan_matrix([scan], space))[0]

    def references(self, ctx):
        if self.name == "content_based_filtering":
            return {p.room_id: p for p in ctx["profiles"][self.kind]}
        self._space = ctx["space"][self.kind]
        return super().references(ctx)

    def score(self, a, b) -> float:
        if self.name == "content_based_filtering":
            if isinstance(b, fp.RoomProfile):
                return 1.0 - fp.cbf_distances(a, [b])[b.room_id]
            return 1.0 - _cos(a, b)
        if self.static:
            return float(self.model.predict(np.array([fp.pair_features(a, b).values]))[0])
        return float(a == b)


def _cos(a: fp.RadioScan, b: fp.RadioScan) -> float:
    return fp.cbf_distances(a, [fp.RoomProfile("x", dict(b.observations))])["x"]


def make_technique(name: str, feature_type: str) -> Technique:
    key = (name, feature_type)
    if key in SIMILARITY_TECHNIQUES:
        return SimilarityTechnique(name, feature_type)
    if key in ML_TECHNIQUES:
        return MLTechnique(name, feature_type)
    if key in LOCALIZATION_TECHNIQUES:
        return LocalizationTechnique(name, feature_type)
    raise ConfigInvalid(f"unknown technique {key}")


# -- evaluation -------------------------------------------------------------------------


def _as_labels(partition) -> dict:
    if isinstance(partition, dict):
        return dict(partition)
    out = {}
    for g, members in enumerate(partition):
        for m in members:
            if m in out:
                raise ValueError(f"client {m} appears in two groups")
            out[m] = g
    return out


def pair_confusion(predicted, truth) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) over unordered client pairs, positive meaning same group."""
    p, t = _as_labels(predicted), _as_labels(truth)
    if set(p) != set(t):
        raise UniverseMismatch("predicted and true partitions cover different clients")
    ids = sorted(p)
    tp = fp_ = fn = tn = 0
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            sp, st = p[a] == p[b], t[a] == t[b]
            tp += sp and st
            fp_ += sp and not st
            fn += st and not sp
            tn += not sp and not st
    return tp, fp_, fn, tn


def _ratio(num: float, den: float) -> float:
    # an empty denominator means nothing could go wrong
    return num / den if den else 1.0


def binary_report(tp: int, fp_: int, fn: int, tn: int, runtime_s: float = 0.0) -> EvalReport:
    total = tp + fp_ + fn + tn
    acc = _ratio(tp + tn, total)
    prec, rec = _ratio(tp, tp + fp_), _ratio(tp, tp + fn)
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return EvalReport(acc, prec, rec, f1, runtime_s=runtime_s, extra={"pairs": (tp, fp_, fn, tn)})


def pooled_report(reports: Sequence[EvalReport]) -> EvalReport:
    """Pairwise report over several static runs, pooling their pair counts."""
    counts = np.sum([r.extra["pairs"] for r in reports], axis=0)
    return binary_report(*(int(c) for c in counts), runtime_s=float(np.mean([r.runtime_s for r in reports])))


def evaluate(predicted, truth, runtime_s: float = 0.0) -> EvalReport:
    """Pairwise same-group evaluation of a predicted partition against the truth."""
    return binary_report(*pair_confusion(predicted, truth), runtime_s=runtime_s)


def evaluate_assignments(predicted: Sequence, truth: Sequence, runtime_s: float = 0.0) -> EvalReport:
    """Multiclass room assignment (corridor included), macro-averaged over the true classes."""
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    if predicted.shape != truth.shape:
        raise UniverseMismatch("predicted and true assignments differ in length")
    C, labels = confusion_matrix(truth, predicted)
    present = C.sum(axis=1) > 0
    tp = np.diag(C).astype(float)
    pred = C.sum(axis=0)
    prec = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)[present]
    rec = (tp / np.maximum(C.sum(axis=1), 1))[present]
    den = prec + rec
    f1 = np.divide(2 * prec * rec, den, out=np.zeros_like(prec), where=den > 0)
    return EvalReport(float(tp.sum() / C.sum()), float(prec.mean()), float(rec.mean()), float(f1.mean()),
                      runtime_s=runtime_s)


@dataclass
class SimulationReport:
    config: ScenarioConfig
    rows: dict = field(default_factory=dict)  # (technique, feature_type) -> EvalReport
    rounds: list = field(default_factory=list)

    def table(self) -> list[dict]:
        out = []
        for (name, ftype), r in sorted(self.rows.items()):
            out.append({"technique": name, "feature_type": ftype, "overall": r.overall, "runtime_s": r.runtime_s,
                        "accuracy": r.accuracy, "precision": r.precision, "recall": r.recall, "f1": r.f1})
        return out

    def write_csv(self, path, timing: bool = True) -> None:
        """Report table; with ``timing=False`` the wall-clock column is written as 0."""
        with open(path, "w") as fh:
            fh.write(",".join(REPORT_COLUMNS) + "\n")
            for row in self.table():
                if not timing:
                    row["runtime_s"] = 0.0
                fh.write(",".join(row[c] if isinstance(row[c], str) else f"{row[c]:.6f}" for c in REPORT_COLUMNS) + "\n")

    def __getitem__(self, key) -> EvalReport:
        return self.rows[tuple(key)]


# -- shared training material -------------------------------------------------------------


def _training_sets(patterns: Sequence[LightPattern], cfg: ScenarioConfig, rng, noise_class: bool,
                   need_library: bool) -> tuple[dict, tuple]:
    signals, labels = [], []
    for i, p in enumerate(patterns):
        for _ in range(TRAIN_WINDOWS):
            signals.append(_light(p, cfg, rng).voltage_mv)
            labels.append(fp.room_name(i))
    if noise_class:
        for _ in range(TRAIN_WINDOWS):
            signals.append(_light(None, cfg, rng).voltage_mv)
            labels.append(CORRIDOR)
    y = np.array(labels)
    train = {False: (np.array([statistical_features(v).as_array() for v in signals]), y)}
    names: tuple = ()
    if need_library:
        lib = [ts_feature_library(v) for v in signals]
        train[True] = (np.array([f.as_array() for f in lib]), y)
        names = lib[0].names
    return train, names


def _calibration_pairs(envs: dict, room: int, rng, n: int = CALIBRATION_PAIRS) -> dict:
    """Labelled scan pairs in one room: same spot (True) or two different spots (False)."""
    out = {}
    for kind, env in envs.items():
        pairs = []
        for i in range(n):
            spot = fp.random_position(env, room, rng)
            other = spot if i % 2 == 0 else fp.random_position(env, room, rng)
            a = _scan_window({kind: env}, [spot] * SCAN_WINDOW_S, 0.0, rng)[kind]
            b = _scan_window({kind: env}, [_jitter(other, rng)] * SCAN_WINDOW_S, 0.0, rng)[kind]
            pairs.append((a, b, i % 2 == 0))
        out[kind] = pairs
    return out


def _jitter(pos, rng, sd: float = 0.25) -> np.ndarray:
    return np.asarray(pos) + rng.normal(0.0, sd, 2)


def _environments(n_rooms: int, seed: int) -> dict:
    # Bluetooth beacons are sparser and weaker than access points
    return {
        fp.RadioKind.WIFI: fp.synth_environment(n_rooms, 3, build_layout(n_rooms).centers, _stream(seed, "wifi"),
                                                fp.RadioKind.WIFI, noise_db=4.0),
        fp.RadioKind.BLUETOOTH: fp.synth_environment(n_rooms, 2, build_layout(n_rooms).centers,
                                                     _stream(seed, "bluetooth"), fp.RadioKind.BLUETOOTH, noise_db=6.0),
    }


def _techniques(cfg: ScenarioConfig) -> list[Technique]:
    keys = cfg.techniques if cfg.techniques is not None else ALL_TECHNIQUES
    return [make_technique(*k) for k in keys]


def _receive(captures: Sequence[Capture]) -> list[tuple[float, str, dict]]:
    """Send every capture through the framed transport; returns arrivals in order."""
    net = InProcessTransport()
    for c in captures:
        for data in c.frames():
            net.send(c.client_id, data, 0.0, c.latency_s)
    got: dict[str, dict] = {}
    arrival: dict[str, float] = {}
    for t, cid, msg in net.deliver_until(math.inf):
        if msg.msg_type is MsgType.RAW_LIGHT_SIGNAL:
            v, _, _ = decode_signal(msg.payload)
            got.setdefault(cid, {})[msg.msg_type] = v
        else:
            obs, ts = decode_scan(msg.payload)
            kind = fp.RadioKind.WIFI if msg.msg_type is MsgType.WIFI_SCAN else fp.RadioKind.BLUETOOTH
            got.setdefault(cid, {})[msg.msg_type] = fp.RadioScan(kind, ts, tuple(obs))
        arrival[cid] = t
    return [(arrival[c], c, got[c]) for c in sorted(got, key=lambda c: (arrival[c], c))]


def _add_features(received: dict, need_library: bool) -> None:
    v = received[MsgType.RAW_LIGHT_SIGNAL]
    received[("features", False)] = statistical_features(v).as_array()
    if need_library:
        received[("features", True)] = ts_feature_library(v).as_array()


def _engine(mode: Mode, tech: Technique, areas: int, seed_rng) -> GroupingEngine:
    eng = GroupingEngine(EngineConfig(mode, tech.threshold, tech.msg_type), scorer=tech.score, rng=seed_rng)
    for r in range(areas):
        eng.register(Router(f"router{r:02d}", fp.room_name(r)))
        eng.register(Bulb(f"bulb{r:02d}", fp.room_name(r)))
    return eng


# -- static ---------------------------------------------------------------------------------


def _subsets(users: int, rng) -> list[int]:
    k = int(rng.integers(1, min(3, users) + 1))
    sizes = 1 + rng.multinomial(users - k, np.full(k, 1.0 / k))
    return [i for i, s in enumerate(sizes) for _ in range(s)]


def run_static(cfg: ScenarioConfig) -> SimulationReport:
    """Device-to-device grouping of co-located users in one room over ``cfg.rounds`` rounds."""
    if cfg.mode is not SimMode.STATIC:
        raise ConfigInvalid("run_static needs a static configuration")
    techs = _techniques(cfg)
    need_ml = any(isinstance(t, MLTechnique) for t in techs)
    need_lib = any(t.feature_type == "selected_tsfresh" for t in techs)
    need_radio = any(isinstance(t, LocalizationTechnique) for t in techs)
    envs = _environments(4, cfg.seed)
    calibration = _calibration_pairs(envs, 0, _stream(cfg.seed, "calibration")) if need_radio else {}
    pooled = {t.key: np.zeros(4, dtype=np.int64) for t in techs}
    runtime = {t.key: 0.0 for t in techs}
    report = SimulationReport(cfg)
    for r in range(cfg.rounds):
        rng = _stream(cfg.seed, "round", r)
        length = int(rng.choice(cfg.pattern_lengths))
        membership = _subsets(cfg.users, rng)
        patterns = [generate_pattern(length, rng) for _ in range(max(membership) + 1)]
        spots = {fk: [fp.random_position(envs[fk], 0, rng) for _ in patterns] for fk in envs}
        captures = []
        for u, s in enumerate(membership):
            cid = f"client{u:02d}"
            sig = _light(patterns[s], cfg, rng)
            radio = {}
            for kind, env in envs.items():
                pos = _jitter(spots[kind][s], rng)
                radio[kind] = _scan_window({kind: env}, [pos] * SCAN_WINDOW_S, 0.0, rng)[kind]
            lat = float(rng.uniform(*cfg.latency_range_ms)) / 1000.0
            captures.append(Capture(cid, sig, radio[fp.RadioKind.WIFI], radio[fp.RadioKind.BLUETOOTH], lat,
                                    len(sig) * 0.02))
        truth = {f"client{u:02d}": s for u, s in enumerate(membership)}
        arrivals = _receive(captures)
        if need_ml:
            for _, _, rec in arrivals:
                _add_features(rec, need_lib)
        ctx = {"mode": SimMode.STATIC, "patterns": patterns, "calibration": calibration}
        if need_ml:
            ctx["train"], ctx["train_names"] = _training_sets(patterns, cfg, _stream(cfg.seed, "train", r), False,
                                                              need_lib)
        detail = {"round": r, "length": length, "subsets": len(patterns),
                  "receive_s": max(a for a, _, _ in arrivals) + max(c.window_ms for c in captures) / 1000.0}
        for t in techs:
            t0 = time.perf_counter()
            t.fit(ctx, _stream(cfg.seed, "fit", r, *t.key))
            eng = _engine(Mode.DEVICE_TO_DEVICE, t, 1, _stream(cfg.seed, "engine", r, *t.key))
            for _, cid, rec in arrivals:
                eng.on_client_connect(cid, "router00", {t.msg_type: t.payload(rec)})
            pred = {c: eng.group_of(c) for c in truth}
            elapsed = time.perf_counter() - t0
            pooled[t.key] += pair_confusion(pred, truth)
            runtime[t.key] += elapsed
            detail.setdefault("compute_s", {})["/".join(t.key)] = elapsed
        report.rounds.append(detail)
    for t in techs:
        report.rows[t.key] = binary_report(*(int(x) for x in pooled[t.key]), runtime_s=runtime[t.key] / cfg.rounds)
    return report


# -- dynamic ----------------------------------------------------------------------------------


def _position(path: MobilityPath, spots: Sequence[np.ndarray], t: float) -> np.ndarray:
    for t0, t1, room, a, b in path.segments():
        if t0 <= t < t1:
            if room is not None:
                return spots[a]
            f = (t - t0) / (t1 - t0)
            return (1 - f) * spots[a] + f * spots[b]
    return spots[len(path.visits) - 1]


def _truth_labels(path: MobilityPath, times: np.ndarray) -> np.ndarray:
    out = np.empty(len(times), dtype=object)
    for t0, t1, room, _, _ in path.segments():
        out[(times >= t0) & (times < t1)] = CORRIDOR if room is None else fp.room_name(room)
    out[times >= path.total_s] = fp.room_name(path.visits[-1][0])
    return out.astype(str)


def run_dynamic(cfg: ScenarioConfig) -> SimulationReport:
    """Device-to-area grouping of users walking between rooms.

    A tick every grouping period asks all users for fresh data. A user's
    previous binding is dropped when the tick starts and the new one only
    holds once the data of every user has arrived and been evaluated, so each
    tick leaves a short unbound gap (slowest capture plus latency, plus
    compute). At the start users are evaluated one by one as they connect.
    Users are scored
    on a one-second grid over the whole iteration.
    """
    if cfg.mode is not SimMode.DYNAMIC:
        raise ConfigInvalid("run_dynamic needs a dynamic configuration")
    techs = _techniques(cfg)
    need_ml = any(isinstance(t, MLTechnique) for t in techs)
    need_lib = any(t.feature_type == "selected_tsfresh" for t in techs)
    layout = build_layout(cfg.rooms)
    envs = _environments(cfg.rooms, cfg.seed)
    world = _stream(cfg.seed, "world", cfg.rooms)
    patterns = [generate_pattern(int(world.choice(cfg.pattern_lengths)), world) for _ in range(cfg.rooms)]
    users = [f"client{u:02d}" for u in range(cfg.users)]
    paths, spots = {}, {}
    for u, cid in enumerate(users):
        prng = _stream(cfg.seed, "path", cfg.rooms, u)
        paths[cid] = random_path(cfg.iteration_s, layout, prng)
        spots[cid] = [fp.random_position(envs[fp.RadioKind.WIFI], room, prng) for room, _ in paths[cid].visits]

    ctx = {"mode": SimMode.DYNAMIC, "patterns": patterns, "ref_rng": _stream(cfg.seed, "reference", cfg.rooms)}
    ctx["profiles"] = {k: fp.profiles_for(env, _stream(cfg.seed, "survey", k.value, cfg.rooms))
                       for k, env in envs.items()}
    ctx["space"], ctx["survey"] = {}, {}
    for kind, env in envs.items():
        srng = _stream(cfg.seed, "survey-train", kind.value, cfg.rooms)
        scans, labels = [], []
        for r in range(cfg.rooms):
            for _ in range(8):
                pos = fp.random_position(env, r, srng)
                scans.append(_scan_window({kind: env}, [pos] * SCAN_WINDOW_S, 0.0, srng)[kind])
                labels.append(fp.room_name(r))
        space = fp.station_space(scans)
        ctx["space"][kind] = space
        ctx["survey"][kind] = (fp.scan_matrix(scans, space), np.array(labels))
    if need_ml:
        ctx["train"], ctx["train_names"] = _training_sets(patterns, cfg, _stream(cfg.seed, "train", cfg.rooms), True,
                                                          need_lib)

    period = float(cfg.grouping_period_s)
    ticks = np.arange(0.0, cfg.iteration_s, period)
    grid = np.arange(cfg.iteration_s) + 0.5
    truth = {cid: _truth_labels(paths[cid], grid) for cid in users}

    # captures depend on (user, tick time) only, so runs with other periods reuse them
    per_tick = []
    for tk in ticks:
        caps = []
        for u, cid in enumerate(users):
            crng = _stream(cfg.seed, "capture", cfg.rooms, u, int(round(tk * 1000)))
            room = paths[cid].room_at(tk)
            sig = _light(None if room is None else patterns[room], cfg, crng)
            positions = [_position(paths[cid], spots[cid], tk - (SCAN_WINDOW_S - 1 - i)) for i in range(SCAN_WINDOW_S)]
            radio = _scan_window(envs, positions, float(tk), crng)
            lat = float(crng.uniform(*cfg.latency_range_ms)) / 1000.0
            caps.append(Capture(cid, sig, radio[fp.RadioKind.WIFI], radio[fp.RadioKind.BLUETOOTH], lat,
                                len(sig) * 0.02))
        arrivals = _receive(caps)
        if need_ml:
            for _, _, rec in arrivals:
                _add_features(rec, need_lib)
        per_tick.append((tk, {c.client_id: c for c in caps}, arrivals))

    report = SimulationReport(cfg)
    for t in techs:
        t0 = time.perf_counter()
        t.fit(ctx, _stream(cfg.seed, "fit", cfg.rooms, *t.key))
        eng = _engine(Mode.DEVICE_TO_AREA, t, cfg.rooms, _stream(cfg.seed, "engine", cfg.rooms, *t.key))
        eng.assign_masters(_stream(cfg.seed, "masters", cfg.rooms))
        for area, ref in t.references(ctx).items():
            eng.set_reference(area, ref)
        # (commit time, label) events per user
        events = {cid: [] for cid in users}
        compute_total = 0.0
        for tk, caps, arrivals in per_tick:
            c0 = time.perf_counter()
            if tk == 0:
                # clients join at the start; device-to-area evaluates each one on connect
                decisions = []
                for _, cid, rec in arrivals:
                    decisions += eng.on_client_connect(cid, "router00", {t.msg_type: t.payload(rec)})
            else:
                for _, cid, rec in arrivals:
                    eng.update_payloads(cid, {t.msg_type: t.payload(rec)})
                decisions = eng.periodic_tick(period)
            compute_total += time.perf_counter() - c0
            # a tick is one engine event: it runs once the slowest client's data is in
            ready = max(c.latency_s + c.window_ms / 1000.0 for c in caps.values())
            for d in decisions:
                c = caps[d.client_id]
                arrived = c.latency_s + c.window_ms / 1000.0 if tk == 0 else ready
                commit = tk + arrived + cfg.compute_s
                events[d.client_id].append((tk, commit, d.area_id or CORRIDOR))
        pred_all, truth_all = [], []
        for cid in users:
            pred = np.full(len(grid), CORRIDOR, dtype=object)
            for tk, commit, label in events[cid]:
                # unbound while the tick is pending, bound from commit until the next tick
                pred[grid >= tk] = CORRIDOR
                pred[grid >= commit] = label
            pred_all.append(pred.astype(str))
            truth_all.append(truth[cid])
        elapsed = time.perf_counter() - t0
        report.rows[t.key] = evaluate_assignments(np.concatenate(pred_all), np.concatenate(truth_all),
                                                  runtime_s=compute_total / max(len(ticks), 1))
        report.rounds.append({"technique": "/".join(t.key), "ticks": len(ticks), "compute_s": compute_total,
                              "total_s": elapsed})
    recv = [max(a for a, _, _ in arr) + max(c.window_ms for c in caps.values()) / 1000.0 for _, caps, arr in per_tick]
    report.rounds.append({"receive_s_median": float(np.median(recv)), "compute_model_s": cfg.compute_s})
    return report


def run(cfg: ScenarioConfig) -> SimulationReport:
    return run_static(cfg) if cfg.mode is SimMode.STATIC else run_dynamic(cfg)


def with_overrides(cfg: ScenarioConfig, **kw) -> ScenarioConfig:
    return replace(cfg, **kw)
