"""Room-level localization from Wi-Fi and Bluetooth scans.

Scans are compared pairwise through ten overlap and signal-strength
features, and matched against per-room profiles by cosine distance
(content-based filtering). A log-distance path-loss generator stands in
for captured traces; captured scans can be loaded from CSV instead.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import KindMismatch, NoProfiles
from .lightsig import as_rng
from .simmetrics import _pearson
from scipy.stats import rankdata

RSSI_FLOOR = -100.0
TOP_WINDOW_DB = 6.0
DEFAULT_WINDOW_S = 5.0

PAIR_FEATURE_NAMES = (
    "overlap_count",
    "union_size",
    "jaccard_distance",
    "non_overlap_count",
    "manhattan_rssi",
    "euclidean_rssi",
    "spearman_rssi",
    "pearson_rssi",
    "share_top_device",
    "share_top_within_6db",
)


class RadioKind(str, Enum):
    WIFI = "wifi"
    BLUETOOTH = "bluetooth"


@dataclass(frozen=True)
class RadioScan:
    kind: RadioKind
    t_s: float
    observations: tuple[tuple[str, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", RadioKind(self.kind))
        obs = tuple((str(s), float(r)) for s, r in self.observations)
        object.__setattr__(self, "observations", obs)
        ids = [s for s, _ in obs]
        if len(set(ids)) != len(ids):
            raise ValueError("station ids must be unique within a scan")
        if any(not RSSI_FLOOR <= r <= 0.0 for _, r in obs):
            raise ValueError("rssi must lie in [-100, 0] dBm")

    def as_dict(self) -> dict[str, float]:
        return dict(self.observations)


@dataclass(frozen=True)
class PairFeatures:
    values: tuple[float, ...]
    missing: tuple[bool, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def _top(d: dict[str, float], window: float) -> set[str]:
    if not d:
        return set()
    best = max(d.values())
    return {s for s, r in d.items() if r >= best - window}


def pair_features(a: RadioScan, b: RadioScan) -> PairFeatures:
    """The ten pairwise scan features, in fixed order (see ``PAIR_FEATURE_NAMES``).

    RSSI distances run over the union of stations with unseen stations at
    -100 dBm. Correlations use the shared stations only; with fewer than two
    shared stations or no variance they are 0 and flagged missing. The top
    device of a scan is every station tied at its maximum RSSI.
    """
    if a.kind != b.kind:
        raise KindMismatch(f"cannot compare {a.kind.value} with {b.kind.value} scans")
    da, db = a.as_dict(), b.as_dict()
    sa, sb = set(da), set(db)
    inter = sorted(sa & sb)
    union = sorted(sa | sb)
    va = np.array([da.get(s, RSSI_FLOOR) for s in union])
    vb = np.array([db.get(s, RSSI_FLOOR) for s in union])
    diff = np.abs(va - vb)
    jd = 1.0 - len(inter) / len(union) if union else 0.0
    pear = spear = None
    if len(inter) >= 2:
        xa = np.array([da[s] for s in inter])
        xb = np.array([db[s] for s in inter])
        pear = _pearson(xa, xb)
        spear = _pearson(rankdata(xa), rankdata(xb))
    values = [
        float(len(inter)),
        float(len(union)),
        jd,
        float(len(sa ^ sb)),
        float(diff.sum()),
        float(np.sqrt((diff * diff).sum())),
        0.0 if spear is None else spear,
        0.0 if pear is None else pear,
        float(bool(_top(da, 0.0) & _top(db, 0.0))),
        float(bool(_top(da, TOP_WINDOW_DB) & _top(db, TOP_WINDOW_DB))),
    ]
    missing = [False] * 6 + [spear is None, pear is None, False, False]
    return PairFeatures(tuple(values), tuple(missing))


# -- room profiles and content-based filtering ------------------------------------------


@dataclass(frozen=True)
class RoomProfile:
    room_id: str
    rssi: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not self.rssi:
            raise ValueError("room profile must not be empty")

    def as_dict(self) -> dict[str, float]:
        return dict(self.rssi)


def aggregate_scans(scans: Sequence[RadioScan]) -> dict[str, float]:
    """Mean RSSI per station over the scans in which it was seen."""
    acc: dict[str, list[float]] = defaultdict(list)
    for s in scans:
        for sid, r in s.observations:
            acc[sid].append(r)
    return {sid: float(np.mean(v)) for sid, v in sorted(acc.items())}


def build_profile(room_id, scans: Sequence[RadioScan]) -> RoomProfile:
    return RoomProfile(str(room_id), tuple(aggregate_scans(scans).items()))


def window_scans(scans: Sequence[RadioScan], window_s: float = DEFAULT_WINDOW_S) -> list[RadioScan]:
    """Merge consecutive scans into one aggregated scan per ``window_s`` seconds."""
    if not scans:
        return []
    t0 = min(s.t_s for s in scans)
    buckets: dict[int, list[RadioScan]] = defaultdict(list)
    for s in scans:
        buckets[int((s.t_s - t0) // window_s)].append(s)
    out = []
    for k in sorted(buckets):
        group = buckets[k]
        out.append(RadioScan(group[0].kind, t0 + k * window_s, tuple(aggregate_scans(group).items())))
    return out


def _cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 1.0
    return float(1.0 - np.dot(u, v) / (nu * nv))


def cbf_distances(scan: RadioScan | dict, profiles: Sequence[RoomProfile]) -> dict[str, float]:
    d = scan.as_dict() if isinstance(scan, RadioScan) else dict(scan)
    space = sorted(set(d).union(*(p.as_dict() for p in profiles)))
    # strength above the floor, so unseen stations are 0 (i.e. -100 dBm)
    u = np.array([d.get(s, RSSI_FLOOR) for s in space]) - RSSI_FLOOR
    out = {}
    for p in profiles:
        pd = p.as_dict()
        out[p.room_id] = _cosine_distance(u, np.array([pd.get(s, RSSI_FLOOR) for s in space]) - RSSI_FLOOR)
    return out


def cbf_localize(scan: RadioScan | dict, profiles: Sequence[RoomProfile], tie_tol: float = 1e-12) -> str:
    """Room whose profile is closest in cosine distance; ties go to the smallest room id."""
    if not profiles:
        raise NoProfiles("content-based filtering needs at least one room profile")
    dist = cbf_distances(scan, profiles)
    best = min(dist.values())
    return min(r for r, v in dist.items() if v <= best + tie_tol)


def station_space(scans: Iterable[RadioScan]) -> list[str]:
    return sorted({sid for s in scans for sid, _ in s.observations})


def scan_matrix(scans: Sequence[RadioScan], space: Sequence[str]) -> np.ndarray:
    """Rows of RSSI over a fixed station order, unseen stations at -100 dBm."""
    idx = {s: i for i, s in enumerate(space)}
    M = np.full((len(scans), len(space)), RSSI_FLOOR)
    for r, s in enumerate(scans):
        for sid, v in s.observations:
            if sid in idx:
                M[r, idx[sid]] = v
    return M


# -- synthetic environment --------------------------------------------------------------


@dataclass(frozen=True)
class Environment:
    """Rooms with fixed centres and radio stations placed inside them."""

    kind: RadioKind
    centers: np.ndarray  # (n_rooms, 2) metres
    station_ids: tuple[str, ...]
    station_pos: np.ndarray  # (n_stations, 2)
    station_room: tuple[int, ...]
    room_radius_m: float = 1.0
    noise_db: float = 4.0
    sensitivity_dbm: float = -90.0

    @property
    def n_rooms(self) -> int:
        return len(self.centers)


def path_loss_rssi(d_m, tx_dbm: float = -40.0, exponent: float = 2.5) -> np.ndarray:
    """Mean RSSI at distance d under the log-distance model (1 m reference)."""
    return tx_dbm - 10.0 * exponent * np.log10(np.maximum(np.asarray(d_m, dtype=float), 1.0))


def grid_layout(n_rooms: int, spacing_m: float = 3.0, rows: int = 2) -> np.ndarray:
    """Room centres on a rectangular grid with ``rows`` rows (fewer when n_rooms is small)."""
    rows = min(rows, n_rooms)
    cols = math.ceil(n_rooms / rows)
    return np.array([[(i % cols) * spacing_m, (i // cols) * spacing_m] for i in range(n_rooms)], dtype=float)


def synth_environment(n_rooms: int, aps_per_room: int = 3, layout: Optional[np.ndarray] = None, rng=None,
                      kind=RadioKind.WIFI, noise_db: float = 4.0, room_radius_m: float = 1.0) -> Environment:
    """Place ``aps_per_room`` stations uniformly inside every room."""
    if n_rooms < 1:
        raise ValueError("need at least one room")
    rng = as_rng(rng)
    kind = RadioKind(kind)
    centers = grid_layout(n_rooms) if layout is None else np.asarray(layout, dtype=float)
    ids, pos, rooms = [], [], []
    for r, c in enumerate(centers):
        for i in range(aps_per_room):
            ang, rad = rng.uniform(0, 2 * np.pi), room_radius_m * math.sqrt(rng.uniform())
            pos.append(c + rad * np.array([math.cos(ang), math.sin(ang)]))
            mac = ":".join(f"{int(b):02x}" for b in rng.integers(0, 256, 6))
            ids.append(f"{kind.value}-{mac}")
            rooms.append(r)
    return Environment(kind, centers, tuple(ids), np.array(pos).reshape(-1, 2), tuple(rooms),
                       room_radius_m, noise_db)


def random_position(env: Environment, room: int, rng=None) -> np.ndarray:
    rng = as_rng(rng)
    ang, rad = rng.uniform(0, 2 * np.pi), env.room_radius_m * math.sqrt(rng.uniform())
    return env.centers[room] + rad * np.array([math.cos(ang), math.sin(ang)])


def scan_at(env: Environment, position, t_s: float, rng=None, noise_db: Optional[float] = None) -> RadioScan:
    """One scan from ``position``: path loss plus Gaussian shadowing, stations below sensitivity dropped."""
    rng = as_rng(rng)
    sigma = env.noise_db if noise_db is None else noise_db
    d = np.linalg.norm(env.station_pos - np.asarray(position, dtype=float), axis=1)
    rssi = path_loss_rssi(d) + (rng.normal(0.0, sigma, len(d)) if sigma > 0 else 0.0)
    rssi = np.clip(rssi, RSSI_FLOOR, 0.0)
    obs = tuple((sid, float(round(v, 2))) for sid, v in zip(env.station_ids, rssi) if v >= env.sensitivity_dbm)
    return RadioScan(env.kind, float(t_s), obs)


def room_stream(env: Environment, room: int, n_scans: int, rng=None, t0: float = 0.0,
                noise_db: Optional[float] = None, position=None) -> list[RadioScan]:
    """Scans at 1 Hz from one spot in ``room`` (a fresh random spot unless given)."""
    rng = as_rng(rng)
    pos = random_position(env, room, rng) if position is None else position
    return [scan_at(env, pos, t0 + i, rng, noise_db) for i in range(n_scans)]


def synth_streams(env: Environment, n_scans: int, rng=None, noise_db: Optional[float] = None) -> dict[int, list[RadioScan]]:
    """Per-room scan streams, each from its own random spot."""
    rng = as_rng(rng)
    return {r: room_stream(env, r, n_scans, rng, noise_db=noise_db) for r in range(env.n_rooms)}


def profiles_for(env: Environment, rng=None, n_scans: int = 20, spots: int = 4,
                 noise_db: Optional[float] = None) -> list[RoomProfile]:
    """Survey every room from a few random spots and aggregate into one profile per room."""
    rng = as_rng(rng)
    out = []
    for r in range(env.n_rooms):
        scans = [s for _ in range(spots) for s in room_stream(env, r, n_scans // spots, rng, noise_db=noise_db)]
        out.append(build_profile(room_name(r), scans))
    return out


def room_name(r: int) -> str:
    return f"room{r:02d}"


# -- CSV ------------------------------------------------------------------------------


def write_scans_csv(scans: Sequence[RadioScan], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "t_s", "station_id", "rssi_dbm"])
        for s in scans:
            for sid, r in s.observations:
                w.writerow([s.kind.value, repr(s.t_s), sid, repr(r)])


def read_scans_csv(path) -> list[RadioScan]:
    groups: dict[tuple[str, float], list[tuple[str, float]]] = defaultdict(list)
    order: list[tuple[str, float]] = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["kind"], float(row["t_s"]))
            if key not in groups:
                order.append(key)
            groups[key].append((row["station_id"], float(row["rssi_dbm"])))
    return [RadioScan(k, t, tuple(groups[(k, t)])) for k, t in order]
