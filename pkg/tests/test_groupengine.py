import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from lumigroup import groupengine as ge
from lumigroup.errors import BadType, DuplicateId, LengthMismatch, MissingPayload, Truncated, UnknownClient
from lumigroup.lightsig import LightPattern

RAW = ge.MsgType.RAW_LIGHT_SIGNAL


def close(a, b):
    """Toy scorer on scalar payloads: identical values score 1, far apart score 0."""
    return max(0.0, 1.0 - abs(a - b))


def engine(mode="d2d", areas=("a1", "a2"), seed=0):
    eng = ge.GroupingEngine(ge.EngineConfig(mode=mode, threshold=0.7), scorer=close, rng=seed)
    for i, area in enumerate(areas):
        eng.register(ge.Router(f"r{i}", area))
        for j in range(3):
            eng.register(ge.Bulb(f"b{i}{j}", area))
    return eng


# -- framing ----------------------------------------------------------------------------


def test_frame_bytes():
    assert ge.frame(ge.Message(2, b"ab")).hex() == "02000000026162"


@given(st.sampled_from(list(ge.MsgType)), st.binary(max_size=65536))
@settings(max_examples=40)
def test_frame_round_trip(t, payload):
    m = ge.Message(t, payload)
    assert ge.parse(ge.frame(m)) == m


def test_bad_type():
    with pytest.raises(BadType):
        ge.parse(bytes([7, 0, 0, 0, 0]))
    with pytest.raises(BadType):
        ge.Message(0, b"")


@pytest.mark.parametrize("data", [b"", b"\x01", b"\x01\x00\x00\x00", b"\x01\x00\x00\x00\x03ab"])
def test_truncated(data):
    with pytest.raises(Truncated):
        ge.parse(data)


def test_trailing_bytes():
    with pytest.raises(LengthMismatch):
        ge.parse(ge.frame(ge.Message(1, b"ab")) + b"x")


def test_split_stream_keeps_partial_tail():
    f1, f2 = ge.frame(ge.Message(1, b"abc")), ge.frame(ge.Message(3, b"{}"))
    msgs, rest = ge.split_stream(f1 + f2[:4])
    assert [m.payload for m in msgs] == [b"abc"]
    assert rest == f2[:4]


def test_payload_codecs():
    v = np.linspace(0, 1000, 17)
    out, interval, epoch = ge.decode_signal(ge.encode_signal(v, 20, 3))
    np.testing.assert_array_equal(out, v)
    assert (interval, epoch) == (20, 3)
    p = LightPattern(((1, 12.5), (0, 40.0)))
    assert ge.decode_pattern(ge.encode_pattern(p, 9)) == (p, 9)
    obs = [("wifi-aa", -40.5), ("wifi-bb", -71.0)]
    assert ge.decode_scan(ge.encode_scan(obs, 2.0)) == (obs, 2.0)


def test_transport_orders_by_arrival():
    tr = ge.InProcessTransport()
    tr.send("s", ge.frame(ge.Message(1, b"late")), 0.0, 0.5)
    tr.send("s", ge.frame(ge.Message(1, b"early")), 0.1, 0.1)
    got = tr.deliver_until(1.0)
    assert [m.payload for _, _, m in got] == [b"early", b"late"]
    assert len(tr) == 0


# -- registry ---------------------------------------------------------------------------


def test_one_master_per_area_and_slaves_mirror():
    eng = engine()
    roles = eng.assign_masters()
    for area in eng.areas():
        ids = [b for b, x in eng.bulbs.items() if x.area_id == area]
        assert sum(roles[b] is ge.Role.MASTER for b in ids) == 1
        assert len({eng.bulbs[b].current_pattern for b in ids}) == 1
    assert eng.check_invariants() == []


def test_linked_areas_share_pattern():
    eng = engine()
    eng.link_areas("a2", "a1")
    eng.assign_masters()
    assert eng.area_pattern("a1") == eng.area_pattern("a2")


def test_duplicate_ids_rejected():
    eng = engine()
    with pytest.raises(DuplicateId):
        eng.register(ge.Bulb("b00", "a1"))
    with pytest.raises(DuplicateId):
        eng.register(ge.Router("b00", "a1"))


# -- device-to-device -------------------------------------------------------------------


def test_d2d_first_client_waits():
    eng = engine()
    assert eng.on_client_connect("c1", "r0", {RAW: 0.0}) == []
    assert eng.groups == {}
    decs = eng.on_client_connect("c2", "r0", {RAW: 0.1})
    assert [d.client_id for d in decs] == ["c1", "c2"]
    assert eng.partition() == [frozenset({"c1", "c2"})]


def test_d2d_dissimilar_clients_split():
    eng = engine()
    eng.on_client_connect("c1", "r0", {RAW: 0.0})
    eng.on_client_connect("c2", "r0", {RAW: 5.0})
    assert eng.partition() == [frozenset({"c1"}), frozenset({"c2"})]


def test_d2d_joins_best_group():
    eng = engine()
    for cid, v in [("c1", 0.0), ("c2", 3.0), ("c3", 0.2), ("c4", 2.9)]:
        eng.on_client_connect(cid, "r0", {RAW: v})
    assert eng.partition() == [frozenset({"c1", "c3"}), frozenset({"c2", "c4"})]


def test_missing_payload():
    eng = engine()
    eng.on_client_connect("c1", "r0", {RAW: 0.0})
    with pytest.raises(MissingPayload):
        eng.on_client_connect("c2", "r0", {})


def test_disconnect_sole_member_removes_group():
    eng = engine()
    eng.on_client_connect("c1", "r0", {RAW: 0.0})
    eng.on_client_connect("c2", "r0", {RAW: 5.0})
    eng.on_client_disconnect("c2")
    assert eng.partition() == [frozenset({"c1"})]
    with pytest.raises(UnknownClient):
        eng.on_client_disconnect("c2")


def test_disconnect_leaves_other_groups():
    eng = engine()
    for cid, v in [("c1", 0.0), ("c2", 3.0), ("c3", 0.2), ("c4", 2.9), ("c5", 3.1)]:
        eng.on_client_connect(cid, "r0", {RAW: v})
    before = {gid: m for gid, m in eng.snapshot().items() if "c3" not in m}
    eng.on_client_disconnect("c3")
    after = eng.snapshot()
    for gid, m in before.items():
        assert after[gid] == m


def test_representative_is_uniform():
    members = [f"m{i}" for i in range(4)]
    sess = {m: ge.ClientSession(m, "r0", {RAW: float(k)}) for k, m in enumerate(members)}
    client = ge.ClientSession("x", "r0", {RAW: 0.0})
    group = ge.DeviceGroup(1, ge.Mode.DEVICE_TO_DEVICE, frozenset(members))
    rng = np.random.default_rng(0)
    chosen = []

    def rec(a, b):
        chosen.append(b)
        return 1.0

    for _ in range(4000):
        ge.evaluate_d2d(client, [group], sess, rec, 0.5, RAW, rng)
    counts = np.bincount(np.array(chosen, dtype=int), minlength=4)
    assert chisquare(counts).pvalue > 0.001


def test_stale_epoch_member_not_representative():
    sess = {"old": ge.ClientSession("old", "r0", {RAW: 0.0}, epoch=1),
            "new": ge.ClientSession("new", "r0", {RAW: 9.0}, epoch=2)}
    client = ge.ClientSession("x", "r0", {RAW: 9.0}, epoch=2)
    group = ge.DeviceGroup(1, ge.Mode.DEVICE_TO_DEVICE, frozenset(sess))
    for s in range(20):
        dec = ge.evaluate_d2d(client, [group], sess, close, 0.7, RAW, np.random.default_rng(s))
        assert dec.group_id == 1 and dec.score == 1.0


def test_periodic_tick_regroups_by_id_order():
    eng = engine()
    eng.on_client_connect("c1", "r0", {RAW: 0.0})
    eng.on_client_connect("c2", "r0", {RAW: 0.1})
    eng.update_payloads("c2", {RAW: 5.0})
    decs = eng.periodic_tick()
    assert [d.client_id for d in decs] == ["c1", "c2"]
    assert eng.partition() == [frozenset({"c1"}), frozenset({"c2"})]


# -- device-to-area ---------------------------------------------------------------------


def test_d2a_binds_immediately():
    eng = engine("d2a")
    eng.set_reference("a1", 0.0)
    eng.set_reference("a2", 4.0)
    decs = eng.on_client_connect("c1", "r0", {RAW: 3.9})
    assert decs[0].area_id == "a2"
    eng.on_client_connect("c2", "r1", {RAW: 4.1})
    assert eng.partition() == [frozenset({"c1", "c2"})]
    assert eng.groups[eng.group_of("c1")].area_id == "a2"


def test_d2a_below_threshold_unbound():
    eng = engine("d2a")
    eng.set_reference("a1", 0.0)
    decs = eng.on_client_connect("c1", "r0", {RAW: 10.0})
    assert decs[0].area_id is None and eng.group_of("c1") is None


# -- random event sequences -------------------------------------------------------------

events = st.lists(st.tuples(st.sampled_from(["connect", "disconnect", "tick", "masters"]),
                            st.integers(0, 11), st.floats(0, 3)), max_size=60)


@given(events, st.sampled_from(["d2d", "d2a"]))
def test_invariants_under_random_events(evs, mode):
    eng = engine(mode)
    eng.set_reference("a1", 0.0)
    eng.set_reference("a2", 2.0)
    for kind, i, v in evs:
        cid = f"c{i:02d}"
        if kind == "connect" and cid not in eng.sessions:
            eng.on_client_connect(cid, f"r{i % 2}", {RAW: v})
        elif kind == "disconnect" and cid in eng.sessions:
            eng.on_client_disconnect(cid)
        elif kind == "tick":
            eng.periodic_tick()
        elif kind == "masters":
            eng.assign_masters()
        assert eng.check_invariants() == []
