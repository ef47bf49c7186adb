import random

import pytest
from hypothesis import given, settings, strategies as st

from mym.errors import DecodeError, EmptyInterests, EmptyMessage, PayloadTooLarge
from mym.matchmaking import Profile
from mym.protocol import (
    BROADCAST,
    HEADER_SIZE,
    SHORT_RANGE,
    WIDE_AREA,
    Frame,
    FrameKind,
    NodeEngine,
    ProtocolParams,
    SessionState,
    decode_frame,
    encode_frame,
    encode_payload,
)


def person(campus, pid, *paths, location=(0.0, 0.0)):
    from mym.matchmaking import DynamicContext

    return Profile(
        person_id=pid,
        name=pid.title(),
        interests=frozenset(campus.resolve(p) for p in paths),
        context=DynamicContext(location=location),
    )


def pump(engines, frames, now, drop=lambda f: False):
    """Deliver frames between engines (broadcast to all others) until nothing is left in flight."""
    deliveries = []
    queue = list(frames)
    while queue:
        f = queue.pop(0)
        targets = [n for n in engines if n != f.src] if f.dst == BROADCAST else [f.dst]
        for n in targets:
            if drop(f):
                continue
            delta, out = engines[n].on_bytes(encode_frame(f), now)
            deliveries.append((n, f, delta))
            queue.extend(out)
    return deliveries


@pytest.fixture
def pair(campus):
    a = NodeEngine(1, person(campus, "nkechi", "Music/Highlife", "Technology/Programming"), campus)
    b = NodeEngine(2, person(campus, "john", "Music/Highlife", "Technology/Programming", location=(3.0, 0.0)), campus)
    engines = {1: a, 2: b}
    pump(engines, a.on_tick(0.0) + b.on_tick(0.0), 0.0)
    return a, b, engines


# --- codec ----------------------------------------------------------------


def test_minimal_beacon_is_29_bytes():
    data = encode_frame(Frame(FrameKind.BEACON, 1, BROADCAST, 0))
    assert HEADER_SIZE == 1 + 8 + 8 + 8 + 4 == 29
    assert len(data) == 29
    assert data[0] == FrameKind.BEACON
    assert data[9:17] == b"\xff" * 8


def test_codec_is_big_endian():
    data = encode_frame(Frame(FrameKind.CHAT, 0x0102, 3, 0x0A0B, b"hi"))
    assert data[1:9] == bytes([0, 0, 0, 0, 0, 0, 1, 2])
    assert data[17:25] == bytes([0, 0, 0, 0, 0, 0, 0x0A, 0x0B])
    assert data[25:29] == bytes([0, 0, 0, 2])
    assert data[29:] == b"hi"


@pytest.mark.parametrize(
    "data",
    [
        b"",
        b"\x01" * 28,
        encode_frame(Frame(FrameKind.CHAT, 1, 2, 3, b"abc"))[:-1],
        encode_frame(Frame(FrameKind.CHAT, 1, 2, 3, b"abc")) + b"!",
        b"\x63" + encode_frame(Frame(FrameKind.ACK, 1, 2, 3))[1:],
        bytes([FrameKind.CHAT]) + (1).to_bytes(8, "big") + b"\xff" * 8 + bytes(12),
    ],
    ids=["empty", "short-header", "truncated", "trailing", "bad-kind", "broadcast-chat"],
)
def test_decode_errors(data):
    with pytest.raises(DecodeError):
        decode_frame(data)


def test_encode_rejects_invalid():
    with pytest.raises(ValueError):
        encode_frame(Frame(FrameKind.CHAT, 1, BROADCAST, 1))
    with pytest.raises(PayloadTooLarge):
        encode_frame(Frame(FrameKind.CHAT, 1, 2, 1, b"x" * 4097))
    with pytest.raises(ValueError):
        encode_frame(Frame(FrameKind.CHAT, 1, 2, 2**64))


frames = st.builds(
    lambda kind, src, dst, seq, payload, bcast: Frame(
        kind, src, BROADCAST if bcast and kind in (FrameKind.BEACON, FrameKind.FRIEND_SEARCH) else dst, seq, payload
    ),
    st.sampled_from(list(FrameKind)),
    st.integers(0, 2**64 - 2),
    st.integers(0, 2**64 - 2),
    st.integers(0, 2**64 - 1),
    st.binary(max_size=512),
    st.booleans(),
)


@settings(max_examples=300, deadline=None)
@given(frames)
def test_codec_round_trip(frame):
    data = encode_frame(frame)
    assert decode_frame(data) == frame
    assert encode_frame(decode_frame(data)) == data


def test_canonical_payload():
    assert encode_payload({"b": 1, "a": [1, 2], "t": "é"}) == '{"a":[1,2],"b":1,"t":"é"}'.encode()


# --- engine ---------------------------------------------------------------


def test_first_tick_beacons_once(campus):
    e = NodeEngine(1, person(campus, "a", "Music/Jazz"), campus)
    out = e.on_tick(0.0)
    assert [f.kind for f in out] == [FrameKind.BEACON]
    assert out[0].dst == BROADCAST and out[0].src == 1
    assert e.on_tick(0.5) == []
    assert [f.kind for f in e.on_tick(1.0)] == [FrameKind.BEACON]
    with pytest.raises(ValueError):
        e.on_tick(0.2)


def test_beacon_starts_handshake(campus):
    a = NodeEngine(1, person(campus, "a", "Music/Jazz"), campus)
    b = NodeEngine(2, person(campus, "b", "Music/Jazz"), campus)
    beacon = a.on_tick(0.0)[0]
    delta, out = b.on_frame(beacon, 0.0)
    assert b.sessions[1].state == SessionState.DISCOVERED
    assert [f.kind for f in out] == [FrameKind.PROFILE_REQ]
    assert delta.transitions == [(1, SessionState.IDLE, SessionState.DISCOVERED)]


def test_handshake_completes(pair):
    a, b, _ = pair
    for x, y in ((a, b), (b, a)):
        s = x.sessions[y.node_id]
        assert s.state == SessionState.PROFILE_EXCHANGED
        assert s.peer_profile.person_id == y.person_id
    assert "john" in a.graph.prosumers


def test_session_timeout(pair):
    a, b, _ = pair
    a.on_tick(5.0)
    assert a.sessions[2].state == SessionState.PROFILE_EXCHANGED
    a.on_tick(10.0)
    assert a.sessions[2].state == SessionState.PROFILE_EXCHANGED  # exactly at the timeout: still alive
    a.on_tick(10.1)
    assert a.sessions[2].state == SessionState.IDLE
    assert a.sessions[2].peer_profile is None


def test_chat_and_ack(pair):
    a, b, engines = pair
    seq_before = a.sessions[2].send_seq
    out = a.send_chat(2, "hello", 1.0)
    assert [f.kind for f in out] == [FrameKind.CHAT]
    assert out[0].seq == seq_before + 1
    deliveries = pump(engines, out, 1.0)
    assert [m.text for m in b.inbox] == ["hello"]
    assert a.sync.acked(2) == 1
    assert len(a.store) == 0  # acknowledged data leaves the store
    assert a.sessions[2].state == SessionState.CONNECTED
    assert b.sessions[1].state == SessionState.CONNECTED
    assert [f.kind for _, f, _ in deliveries] == [FrameKind.CHAT, FrameKind.ACK]


def test_duplicate_chat_delivered_once(pair):
    a, b, _ = pair
    chat = a.send_chat(2, "once only", 1.0)[0]
    d1, out1 = b.on_frame(chat, 1.0)
    d2, out2 = b.on_frame(chat, 1.1)
    assert len(b.inbox) == 1
    assert len(d1.delivered) == 1 and d2.delivered == []
    acks = [f for f in out1 + out2 if f.kind == FrameKind.ACK]
    assert len(acks) == 2
    assert [f.body()["ack"] for f in acks] == [1, 1]


def test_reordered_chats_delivered_in_order(pair):
    a, b, _ = pair
    chats = [a.send_chat(2, f"m{i}", 1.0)[0] for i in range(1, 5)]
    for f in (chats[2], chats[0], chats[3], chats[0], chats[1]):
        b.on_frame(f, 1.0)
    assert [m.text for m in b.inbox] == ["m1", "m2", "m3", "m4"]
    assert [m.n for m in b.inbox] == [1, 2, 3, 4]


def test_chat_validation(pair):
    a, _, _ = pair
    with pytest.raises(EmptyMessage):
        a.send_chat(2, "", 1.0)
    with pytest.raises(PayloadTooLarge):
        a.send_chat(2, "x" * 4096, 1.0)
    a.send_chat(2, "x" * 4000, 1.0)


def test_chat_to_unreachable_peer_is_parked(campus):
    a = NodeEngine(1, person(campus, "a", "Music/Jazz"), campus)
    b = NodeEngine(2, person(campus, "b", "Music/Jazz"), campus)
    engines = {1: a, 2: b}
    assert a.send_chat(2, "see you later", 0.5) == []
    assert len(a.store) == 1
    assert [f.kind for f in a.on_tick(1.0)] == [FrameKind.BEACON]
    # contact: beacons, handshake, then the parked message flows
    pump(engines, a.on_tick(2.0) + b.on_tick(2.0), 2.0)
    assert [m.text for m in b.inbox] == ["see you later"]
    assert len(a.store) == 0


def test_retransmission_limit(pair):
    a, b, engines = pair
    chat = a.send_chat(2, "anyone?", 1.0)
    assert len(chat) == 1
    resent = []
    t = 1.0
    for _ in range(20):
        t += 0.5
        b.on_tick(t)  # keep b's beacons out of a's way: a never hears them
        resent += [f for f in a.on_tick(t) if f.kind == FrameKind.CHAT]
    assert len(resent) == ProtocolParams().retry_limit


def test_friend_search_match(pair, campus):
    a, b, engines = pair
    search = a.friend_search(1.0)
    assert search.kind == FrameKind.FRIEND_SEARCH and search.dst == BROADCAST
    _, replies = b.on_frame(search, 1.0)
    assert [f.kind for f in replies] == [FrameKind.MATCH_RESULT]
    body = replies[0].body()
    assert body["score"]["value"] >= 0.9999
    assert body["classification"] == "exact_match"
    a.on_frame(replies[0], 1.0)
    assert a.ranked_matches()[0][0] == "john"


def test_friend_search_needs_interests(campus):
    lonely = NodeEngine(1, Profile("x", "X"), campus)
    with pytest.raises(EmptyInterests):
        lonely.friend_search(0.0)
    # and a node without interests never answers one
    other = NodeEngine(2, person(campus, "y", "Music/Jazz"), campus)
    _, out = lonely.on_frame(other.friend_search(0.0), 0.0)
    assert out == []


def test_platform_request_switches_preference(pair):
    a, b, engines = pair
    assert a.transport_preference(2) == (SHORT_RANGE,)
    out = a.platform_request(1.0)
    assert [f.kind for f in out] == [FrameKind.PLATFORM_REQ]
    assert a.transport_preference(2) == (WIDE_AREA, SHORT_RANGE)
    assert a.transport_preference(BROADCAST) == (SHORT_RANGE,)
    pump(engines, out, 1.0)
    assert b.transport_preference(1) == (WIDE_AREA, SHORT_RANGE)
    a.on_link_status(False, 2.0)
    assert a.transport_preference(2) == (SHORT_RANGE,)


def test_wide_probe_restores_link(pair):
    a, _, _ = pair
    a.platform_request(1.0)
    calls = []
    a.wide_probe = lambda t: calls.append(t) or t >= 4.0
    a.on_link_status(False, 1.0)
    for t in (1.5, 2.0, 2.5, 3.0, 3.5, 4.0):
        a.on_tick(t)
    assert calls == [2.0, 3.0, 4.0]
    assert a.wide_up


def test_groups_over_the_wire(campus):
    engines = {
        i: NodeEngine(i, person(campus, f"p{i}", "Music/Jazz"), campus) for i in (1, 2, 3)
    }
    pump(engines, [f for e in engines.values() for f in e.on_tick(0.0)], 0.0)
    engines[1].form_group("study", 1.0)
    pump(engines, engines[2].join_group(1, "study", 1.0), 1.0)
    pump(engines, engines[3].join_group(1, "study", 1.1), 1.1)
    for e in engines.values():
        assert e.groups["study"]["members"] == {1, 2, 3}
    pump(engines, engines[2].send_group_chat("study", "hi all", 2.0), 2.0)
    assert [m.text for m in engines[1].inbox] == ["hi all"]
    assert [(m.text, m.group) for m in engines[3].inbox] == [("hi all", "study")]
    g = engines[1].graph
    assert g.group_by_name("study").members == {"p1", "p2", "p3"}


def test_decode_errors_are_counted(pair):
    a, _, _ = pair
    delta, out = a.on_bytes(b"\x01\x02", 1.0)
    assert delta.dropped and out == []
    bad_json = encode_frame(Frame(FrameKind.CHAT, 2, 1, 9, b"{not json"))
    a.on_bytes(bad_json, 1.0)
    missing_field = encode_frame(Frame(FrameKind.CHAT, 2, 1, 10, b"{}"))
    a.on_bytes(missing_field, 1.0)
    assert a.decode_errors == 3


def _random_trace(campus, seed):
    rng = random.Random(seed)
    a = NodeEngine(1, person(campus, "a", "Music/Jazz"), campus)
    b = NodeEngine(2, person(campus, "b", "Music/Rock"), campus)
    engines = {1: a, 2: b}
    t = 0.0
    emitted = []
    for step in range(200):
        t += rng.choice([0.05, 0.1, 0.5, 3.0])
        out = a.on_tick(t) + b.on_tick(t)
        if rng.random() < 0.2:
            out += a.send_chat(2, f"a{step}", t)
        if rng.random() < 0.2:
            out += b.send_chat(1, f"b{step}", t)
        if rng.random() < 0.05:
            out.append(a.friend_search(t))
        emitted += [encode_frame(f) for f in out]
        pump(engines, out, t, drop=lambda f: rng.random() < 0.3)
    return a, b, emitted


def test_engine_is_deterministic(campus):
    a1, b1, e1 = _random_trace(campus, 42)
    a2, b2, e2 = _random_trace(campus, 42)
    assert e1 == e2
    assert a1.inbox == a2.inbox and b1.inbox == b2.inbox


def test_state_steps_and_exactly_once(campus):
    for seed in range(5):
        a, b, _ = _random_trace(campus, seed)
        for eng in (a, b):
            for _, _, old, new in eng.history:
                assert new == SessionState.IDLE or new == old + 1
            ns = [m.n for m in eng.inbox]
            assert ns == list(range(1, len(ns) + 1))
            for s in eng.sessions.values():
                assert (s.peer_profile is not None) == (s.state >= SessionState.PROFILE_EXCHANGED)
