"""Grouping server: bulb/router registry, pattern propagation, triggers and association.

The engine is a single-writer state machine. Events (client connect,
client disconnect, periodic tick) are applied one at a time in the order
they are submitted; every decision is committed before the next event is
looked at. Similarity scoring is delegated to a pluggable ``scorer``.
"""
from __future__ import annotations

import itertools
import json
import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, Optional, Sequence

import heapq
import numpy as np

from .errors import BadType, DuplicateId, LengthMismatch, MissingPayload, Truncated, UnknownClient
from .lightsig import ALLOWED_LENGTHS, LightPattern, as_rng, generate_pattern
from .simmetrics import SimilarityConfig, similarity

HEADER = struct.Struct(">BI")


class MsgType(IntEnum):
    RAW_LIGHT_SIGNAL = 1
    LIGHT_PATTERN = 2
    WIFI_SCAN = 3
    BLUETOOTH_SCAN = 4


@dataclass(frozen=True)
class Message:
    msg_type: MsgType
    payload: bytes

    def __post_init__(self):
        try:
            object.__setattr__(self, "msg_type", MsgType(self.msg_type))
        except ValueError:
            raise BadType(f"unknown message type {self.msg_type!r}") from None
        object.__setattr__(self, "payload", bytes(self.payload))


def frame(m: Message) -> bytes:
    """1 byte type, 4 byte big-endian payload length, payload."""
    if len(m.payload) >= 2**32:
        raise LengthMismatch("payload does not fit a 32-bit length field")
    return HEADER.pack(int(m.msg_type), len(m.payload)) + m.payload


def parse(data: bytes) -> Message:
    """Inverse of :func:`frame`; the buffer must hold exactly one frame."""
    data = bytes(data)
    if len(data) < HEADER.size:
        raise Truncated(f"frame header needs {HEADER.size} bytes, got {len(data)}")
    t, n = HEADER.unpack_from(data)
    if t not in MsgType._value2member_map_:
        raise BadType(f"unknown message type {t}")
    body = data[HEADER.size:]
    if len(body) < n:
        raise Truncated(f"payload announces {n} bytes, got {len(body)}")
    if len(body) > n:
        raise LengthMismatch(f"{len(body) - n} trailing bytes after payload")
    return Message(MsgType(t), body)


def split_stream(buf: bytes) -> tuple[list[Message], bytes]:
    """Cut complete frames off a byte stream; returns (messages, unconsumed remainder)."""
    out = []
    pos = 0
    while len(buf) - pos >= HEADER.size:
        t, n = HEADER.unpack_from(buf, pos)
        end = pos + HEADER.size + n
        if end > len(buf):
            break
        out.append(parse(buf[pos:end]))
        pos = end
    return out, buf[pos:]


# -- payload codecs ---------------------------------------------------------------------


def encode_signal(voltage_mv, sampling_interval_us: int = 20, epoch: int = 0) -> bytes:
    v = np.asarray(voltage_mv, dtype=">f8")
    return struct.pack(">II", sampling_interval_us, epoch) + v.tobytes()


def decode_signal(payload: bytes) -> tuple[np.ndarray, int, int]:
    if len(payload) < 8 or (len(payload) - 8) % 8:
        raise LengthMismatch("malformed signal payload")
    interval, epoch = struct.unpack_from(">II", payload)
    return np.frombuffer(payload, dtype=">f8", offset=8).astype(float), interval, epoch


def encode_pattern(pattern: LightPattern, epoch: int = 0) -> bytes:
    body = b"".join(struct.pack(">Bd", s, d) for s, d in pattern.periods)
    return struct.pack(">I", epoch) + body


def decode_pattern(payload: bytes) -> tuple[LightPattern, int]:
    if len(payload) < 4 or (len(payload) - 4) % 9:
        raise LengthMismatch("malformed pattern payload")
    (epoch,) = struct.unpack_from(">I", payload)
    periods = [struct.unpack_from(">Bd", payload, 4 + 9 * i) for i in range((len(payload) - 4) // 9)]
    return LightPattern(tuple(periods)), epoch


def encode_scan(observations: Sequence[tuple[str, float]], t_s: float = 0.0) -> bytes:
    return json.dumps({"t_s": t_s, "obs": [[s, r] for s, r in observations]}, sort_keys=True).encode()


def decode_scan(payload: bytes) -> tuple[list[tuple[str, float]], float]:
    doc = json.loads(payload.decode())
    return [(s, float(r)) for s, r in doc["obs"]], float(doc["t_s"])


# -- transport -------------------------------------------------------------------------


class InProcessTransport:
    """Byte-frame delivery with injected latency, ordered by (arrival time, send order)."""

    def __init__(self):
        self._queue: list = []
        self._seq = itertools.count()

    def send(self, dest: str, frame_bytes: bytes, t_s: float, latency_s: float) -> float:
        arrival = t_s + latency_s
        heapq.heappush(self._queue, (arrival, next(self._seq), dest, frame_bytes))
        return arrival

    def deliver_until(self, t_s: float) -> list[tuple[float, str, Message]]:
        out = []
        while self._queue and self._queue[0][0] <= t_s:
            arrival, _, dest, data = heapq.heappop(self._queue)
            out.append((arrival, dest, parse(data)))
        return out

    def __len__(self) -> int:
        return len(self._queue)


# -- registry ----------------------------------------------------------------------------


class Role(str, Enum):
    MASTER = "master"
    SLAVE = "slave"


class Mode(str, Enum):
    DEVICE_TO_DEVICE = "d2d"
    DEVICE_TO_AREA = "d2a"


@dataclass
class Bulb:
    bulb_id: str
    area_id: str
    role: Role = Role.SLAVE
    current_pattern: Optional[LightPattern] = None
    epoch: int = 0


@dataclass(frozen=True)
class Router:
    router_id: str
    area_id: str


@dataclass
class ClientSession:
    client_id: str
    router_id: str
    payloads: dict = field(default_factory=dict)  # MsgType -> decoded payload
    epoch: int = 0


@dataclass(frozen=True)
class DeviceGroup:
    group_id: int
    mode: Mode
    members: frozenset
    area_id: Optional[str] = None

    def __post_init__(self):
        if (self.mode is Mode.DEVICE_TO_AREA) != (self.area_id is not None):
            raise ValueError("an area is present exactly for device-to-area groups")


@dataclass(frozen=True)
class GroupingDecision:
    client_id: str
    mode: Mode
    group_id: Optional[int]  # None: a new group (D2D) or unbound (D2A)
    area_id: Optional[str]
    score: float
    scores: tuple = ()


Scorer = Callable[[object, object], float]


def signal_scorer(config: SimilarityConfig = SimilarityConfig()) -> Scorer:
    """Score two raw-signal payloads with the given similarity configuration."""

    def score(a, b) -> float:
        return similarity(a, b, config)

    return score


@dataclass(frozen=True)
class EngineConfig:
    mode: Mode = Mode.DEVICE_TO_DEVICE
    threshold: float = 0.7
    payload_type: MsgType = MsgType.RAW_LIGHT_SIGNAL
    pattern_length: int = 4

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "payload_type", MsgType(self.payload_type))
        if self.pattern_length not in ALLOWED_LENGTHS:
            raise ValueError(f"pattern length must be one of {ALLOWED_LENGTHS}")


def evaluate_d2d(client: ClientSession, groups: Sequence[DeviceGroup], sessions: dict, scorer: Scorer,
                 threshold: float, payload_type: MsgType, rng) -> GroupingDecision:
    """Compare the client against one uniformly drawn member of every group.

    The client joins the best-scoring group if that score reaches the
    threshold (ties go to the lowest group id); otherwise it opens a new
    group. Members whose payload stems from another pattern epoch are not
    eligible as representatives.
    """
    if payload_type not in client.payloads:
        raise MissingPayload(f"client {client.client_id} has no {payload_type.name} payload")
    mine = client.payloads[payload_type]
    scores = []
    for g in sorted(groups, key=lambda g: g.group_id):
        members = sorted(m for m in g.members if m != client.client_id
                         and sessions[m].epoch == client.epoch and payload_type in sessions[m].payloads)
        if not members:
            continue
        rep = members[int(rng.integers(len(members)))]
        scores.append((g.group_id, float(scorer(mine, sessions[rep].payloads[payload_type]))))
    best = max((s for _, s in scores), default=-np.inf)
    winner = min((gid for gid, s in scores if s == best), default=None)
    if winner is None or best < threshold:
        return GroupingDecision(client.client_id, Mode.DEVICE_TO_DEVICE, None, None, max(float(best), 0.0),
                                tuple(scores))
    return GroupingDecision(client.client_id, Mode.DEVICE_TO_DEVICE, winner, None, best, tuple(scores))


def evaluate_d2a(client: ClientSession, references: dict, scorer: Scorer, threshold: float,
                 payload_type: MsgType) -> GroupingDecision:
    """Bind the client to the area whose reference scores highest, if it reaches the threshold."""
    if payload_type not in client.payloads:
        raise MissingPayload(f"client {client.client_id} has no {payload_type.name} payload")
    mine = client.payloads[payload_type]
    scores = tuple((area, float(scorer(mine, ref))) for area, ref in sorted(references.items()))
    best = max((s for _, s in scores), default=-np.inf)
    area = min((a for a, s in scores if s == best), default=None)
    if area is None or best < threshold:
        return GroupingDecision(client.client_id, Mode.DEVICE_TO_AREA, None, None, max(float(best), 0.0), scores)
    return GroupingDecision(client.client_id, Mode.DEVICE_TO_AREA, None, area, best, scores)


class GroupingEngine:
    """Registry plus group state; mutate only through the event methods."""

    def __init__(self, config: EngineConfig = EngineConfig(), scorer: Optional[Scorer] = None, rng=None):
        self.config = config
        self.scorer = scorer or signal_scorer(SimilarityConfig(threshold=config.threshold))
        self.rng = as_rng(rng)
        self.bulbs: dict[str, Bulb] = {}
        self.routers: dict[str, Router] = {}
        self.sessions: dict[str, ClientSession] = {}
        self.groups: dict[int, DeviceGroup] = {}
        self.references: dict[str, object] = {}  # area -> reference payload (device-to-area)
        self.linked: dict[str, str] = {}  # area -> area whose pattern it shares
        self.epoch = 0
        self.pending: list[str] = []
        self.log: list[tuple] = []
        self._next_gid = 1

    # registry ---------------------------------------------------------------------------

    def register(self, entity) -> str:
        if isinstance(entity, Bulb):
            if entity.bulb_id in self.bulbs or entity.bulb_id in self.routers:
                raise DuplicateId(entity.bulb_id)
            self.bulbs[entity.bulb_id] = entity
            return entity.bulb_id
        if isinstance(entity, Router):
            if entity.router_id in self.routers or entity.router_id in self.bulbs:
                raise DuplicateId(entity.router_id)
            self.routers[entity.router_id] = entity
            return entity.router_id
        raise TypeError("only bulbs and routers register")

    def areas(self) -> list[str]:
        return sorted({b.area_id for b in self.bulbs.values()})

    def link_areas(self, area: str, source: str) -> None:
        """Let ``area`` reuse the light pattern of ``source`` (semantic linking)."""
        self.linked[area] = source

    def assign_masters(self, rng=None) -> dict[str, Role]:
        """Pick one random master per area, give it a fresh pattern and mirror it on the slaves."""
        rng = self.rng if rng is None else as_rng(rng)
        patterns: dict[str, LightPattern] = {}
        for area in self.areas():
            ids = sorted(b for b, bulb in self.bulbs.items() if bulb.area_id == area)
            master = ids[int(rng.integers(len(ids)))]
            for b in ids:
                self.bulbs[b].role = Role.MASTER if b == master else Role.SLAVE
            patterns[area] = generate_pattern(self.config.pattern_length, rng)
        for area, source in self.linked.items():
            if source in patterns and area in patterns:
                patterns[area] = patterns[source]
        self.epoch += 1
        for bulb in self.bulbs.values():
            bulb.current_pattern = patterns[bulb.area_id]
            bulb.epoch = self.epoch
        return {b: bulb.role for b, bulb in sorted(self.bulbs.items())}

    def area_pattern(self, area: str) -> LightPattern:
        return next(b.current_pattern for b in self.bulbs.values() if b.area_id == area and b.role is Role.MASTER)

    def set_reference(self, area: str, payload) -> None:
        self.references[area] = payload

    # events -----------------------------------------------------------------------------

    def on_client_connect(self, client_id: str, router_id: str, payloads: Optional[dict] = None,
                          epoch: Optional[int] = None) -> list[GroupingDecision]:
        """Attach a client and evaluate it alone, leaving every other client where it is."""
        if client_id in self.sessions:
            raise DuplicateId(client_id)
        if router_id not in self.routers:
            raise KeyError(f"unknown router {router_id}")
        self.sessions[client_id] = ClientSession(client_id, router_id, dict(payloads or {}),
                                                 self.epoch if epoch is None else epoch)
        self.log.append(("connect", client_id, router_id))
        self.pending.append(client_id)
        return self._drain()

    def update_payloads(self, client_id: str, payloads: dict, epoch: Optional[int] = None) -> None:
        s = self._session(client_id)
        s.payloads.update(payloads)
        if epoch is not None:
            s.epoch = epoch

    def on_client_disconnect(self, client_id: str) -> None:
        """Drop the client from its group; an emptied group disappears."""
        self._session(client_id)
        self.log.append(("disconnect", client_id))
        self._remove_member(client_id)
        self.pending = [c for c in self.pending if c != client_id]
        del self.sessions[client_id]

    def periodic_tick(self, period_s: float = 0.0) -> list[GroupingDecision]:
        """Re-evaluate every connected client from scratch, in client-id order."""
        self.log.append(("tick", period_s))
        self.groups.clear()
        self.pending = sorted(self.sessions)
        return self._drain()

    # internals --------------------------------------------------------------------------

    def _session(self, client_id: str) -> ClientSession:
        try:
            return self.sessions[client_id]
        except KeyError:
            raise UnknownClient(client_id) from None

    def _remove_member(self, client_id: str) -> None:
        for gid, g in list(self.groups.items()):
            if client_id in g.members:
                rest = g.members - {client_id}
                if rest:
                    self.groups[gid] = DeviceGroup(gid, g.mode, rest, g.area_id)
                else:
                    del self.groups[gid]

    def _add_member(self, gid: int, client_id: str) -> None:
        g = self.groups[gid]
        self.groups[gid] = DeviceGroup(gid, g.mode, g.members | {client_id}, g.area_id)

    def _new_group(self, members, area: Optional[str] = None) -> int:
        gid = self._next_gid
        self._next_gid += 1
        mode = Mode.DEVICE_TO_AREA if area is not None else Mode.DEVICE_TO_DEVICE
        self.groups[gid] = DeviceGroup(gid, mode, frozenset(members), area)
        return gid

    def _drain(self) -> list[GroupingDecision]:
        decisions = []
        if self.config.mode is Mode.DEVICE_TO_DEVICE:
            # grouping needs at least two connected clients
            if len(self.sessions) < 2:
                return decisions
            for cid in list(self.pending):
                decisions.append(self._commit_d2d(cid))
        else:
            for cid in list(self.pending):
                decisions.append(self._commit_d2a(cid))
        self.pending = []
        return decisions

    def _commit_d2d(self, cid: str) -> GroupingDecision:
        self._remove_member(cid)
        dec = evaluate_d2d(self.sessions[cid], list(self.groups.values()), self.sessions, self.scorer,
                           self.config.threshold, self.config.payload_type, self.rng)
        if dec.group_id is None:
            gid = self._new_group({cid})
            dec = GroupingDecision(cid, dec.mode, gid, None, dec.score, dec.scores)
        else:
            self._add_member(dec.group_id, cid)
        return dec

    def _commit_d2a(self, cid: str) -> GroupingDecision:
        self._remove_member(cid)
        dec = evaluate_d2a(self.sessions[cid], self.references, self.scorer, self.config.threshold,
                           self.config.payload_type)
        if dec.area_id is None:
            return dec
        gid = next((g.group_id for g in self.groups.values() if g.area_id == dec.area_id), None)
        if gid is None:
            gid = self._new_group({cid}, dec.area_id)
        else:
            self._add_member(gid, cid)
        return GroupingDecision(cid, dec.mode, gid, dec.area_id, dec.score, dec.scores)

    # queries ----------------------------------------------------------------------------

    def snapshot(self) -> dict[int, frozenset]:
        return {gid: g.members for gid, g in sorted(self.groups.items())}

    def group_of(self, client_id: str) -> Optional[int]:
        return next((gid for gid, g in self.groups.items() if client_id in g.members), None)

    def partition(self) -> list[frozenset]:
        """Groups as a canonical list of member sets (sorted by smallest member)."""
        return sorted(self.snapshot().values(), key=lambda m: min(m))

    def check_invariants(self) -> list[str]:
        """Violated invariants, as messages; empty when the state is consistent."""
        problems = []
        seen: dict[str, int] = {}
        for gid, g in self.groups.items():
            if not g.members:
                problems.append(f"group {gid} is empty")
            for m in g.members:
                if m in seen:
                    problems.append(f"client {m} in groups {seen[m]} and {gid}")
                seen[m] = gid
                if m not in self.sessions:
                    problems.append(f"group {gid} holds disconnected client {m}")
            if g.mode is Mode.DEVICE_TO_AREA and g.area_id not in self.references:
                problems.append(f"group {gid} bound to unknown area {g.area_id}")
        for area in self.areas():
            bulbs = [b for b in self.bulbs.values() if b.area_id == area]
            masters = [b for b in bulbs if b.role is Role.MASTER]
            if any(b.current_pattern is not None for b in bulbs):
                if len(masters) != 1:
                    problems.append(f"area {area} has {len(masters)} masters")
                elif any(b.current_pattern != masters[0].current_pattern for b in bulbs):
                    problems.append(f"slaves of area {area} do not mirror the master pattern")
        for s in self.sessions.values():
            if s.router_id not in self.routers:
                problems.append(f"client {s.client_id} attached to unknown router")
        return problems
