"""Per-node protocol engine and the canonical frame codec.

Wire format (all integers big-endian)::

    kind:u8 | src:u64 | dst:u64 | seq:u64 | length:u32 | payload[length]

``dst = 2**64 - 1`` is broadcast, allowed only for BEACON and FRIEND_SEARCH.
Payloads are canonical JSON: sorted keys, no insignificant whitespace, UTF-8.

Discovery runs BEACON -> PROFILE_REQ -> PROFILE_RESP.  CHAT and GROUP_OP form a
reliable per-peer data stream: each message carries a data number ``n``,
receivers deliver in ``n`` order exactly once and answer with a cumulative
ACK.  Unacknowledged data lives in the node's content store, so the same
buffer serves retransmission and store-and-forward.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

from .contentstore import ContentStore, StoreEntry, SyncState
from .errors import (
    DecodeError,
    EmptyInterests,
    EmptyMessage,
    MymError,
    PayloadTooLarge,
    UnknownKind,
)
from .matchmaking import (
    MatchParams,
    Profile,
    RelevanceScore,
    is_match,
    planar_distance,
    profile_from_dict,
    profile_to_dict,
    rank_scores,
    relevance,
)
from .ontology import Taxonomy
from .socialgraph import SocialGraph

BROADCAST = 2**64 - 1
HEADER = struct.Struct(">BQQQI")
HEADER_SIZE = HEADER.size  # 29
DEFAULT_MAX_PAYLOAD = 4096

SHORT_RANGE = "short_range"
WIDE_AREA = "wide_area"

# Slack for float time comparisons against configured intervals.
_EPS = 1e-9


class FrameKind(enum.IntEnum):
    BEACON = 1
    PROFILE_REQ = 2
    PROFILE_RESP = 3
    FRIEND_SEARCH = 4
    MATCH_RESULT = 5
    CHAT = 6
    GROUP_OP = 7
    SYNC = 8
    PLATFORM_REQ = 9
    ACK = 10


BROADCASTABLE = frozenset({FrameKind.BEACON, FrameKind.FRIEND_SEARCH})
DATA_KINDS = frozenset({FrameKind.CHAT, FrameKind.GROUP_OP})


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    src: int
    dst: int
    seq: int
    payload: bytes = b""

    def body(self) -> dict[str, Any]:
        return decode_payload(self.payload)


def encode_payload(obj: dict[str, Any]) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def decode_payload(data: bytes) -> dict[str, Any]:
    if not data:
        return {}
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"payload is not canonical JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise DecodeError("payload must be a JSON object")
    return obj


def _check_u64(name: str, v: int) -> None:
    if not isinstance(v, int) or not 0 <= v < 2**64:
        raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")


def encode_frame(frame: Frame, max_payload: int = DEFAULT_MAX_PAYLOAD) -> bytes:
    try:
        kind = FrameKind(frame.kind)
    except ValueError:
        raise UnknownKind(f"unknown frame kind {frame.kind!r}") from None
    _check_u64("src", frame.src)
    _check_u64("dst", frame.dst)
    _check_u64("seq", frame.seq)
    if frame.src == BROADCAST:
        raise ValueError("src may not be the broadcast address")
    if frame.dst == BROADCAST and kind not in BROADCASTABLE:
        raise ValueError(f"{kind.name} frames must be unicast")
    if len(frame.payload) > max_payload:
        raise PayloadTooLarge(f"payload of {len(frame.payload)} bytes exceeds {max_payload}")
    return HEADER.pack(kind, frame.src, frame.dst, frame.seq, len(frame.payload)) + bytes(frame.payload)


def decode_frame(data: bytes, max_payload: int = DEFAULT_MAX_PAYLOAD) -> Frame:
    if len(data) < HEADER_SIZE:
        raise DecodeError(f"truncated frame: {len(data)} bytes < {HEADER_SIZE}-byte header")
    raw_kind, src, dst, seq, length = HEADER.unpack_from(data)
    try:
        kind = FrameKind(raw_kind)
    except ValueError:
        raise DecodeError(f"bad frame kind {raw_kind}") from None
    if length > max_payload:
        raise DecodeError(f"declared payload length {length} exceeds {max_payload}")
    if len(data) != HEADER_SIZE + length:
        raise DecodeError(f"length mismatch: header says {length}, got {len(data) - HEADER_SIZE}")
    if src == BROADCAST:
        raise DecodeError("broadcast source address")
    if dst == BROADCAST and kind not in BROADCASTABLE:
        raise DecodeError(f"{kind.name} may not be broadcast")
    return Frame(kind, src, dst, seq, bytes(data[HEADER_SIZE:]))


class SessionState(enum.IntEnum):
    IDLE = 0
    DISCOVERED = 1
    PROFILE_EXCHANGED = 2
    CONNECTED = 3


@dataclass
class PeerSession:
    peer: int
    state: SessionState = SessionState.IDLE
    last_seen: float = 0.0
    peer_profile: Optional[Profile] = None
    send_seq: int = 0
    recv_seq: int = 0
    location: Optional[tuple[float, float]] = None
    ever_exchanged: bool = False
    peer_online: bool = False
    # outgoing data stream
    next_msg: int = 0
    attempts: dict[int, int] = field(default_factory=dict)
    last_tx: dict[int, float] = field(default_factory=dict)
    # incoming data stream
    delivered: int = 0
    reorder: dict[int, tuple[FrameKind, dict[str, Any]]] = field(default_factory=dict)


@dataclass(frozen=True)
class ProtocolParams:
    beacon_interval: float = 1.0
    session_timeout: float = 10.0
    max_payload: int = DEFAULT_MAX_PAYLOAD
    retry_limit: int = 5
    retry_interval: float = 1.0
    store_capacity: int = 1024 * 1024
    match: MatchParams = field(default_factory=MatchParams)

    def __post_init__(self):
        if self.beacon_interval <= 0 or self.session_timeout <= 0 or self.retry_interval <= 0:
            raise ValueError("intervals and timeouts must be positive")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be non-negative")
        if not 0 < self.max_payload < 2**32:
            raise ValueError("max_payload out of range")


@dataclass(frozen=True)
class InboxMessage:
    peer: int
    n: int
    text: str
    sent_at: float
    delivered_at: float
    group: Optional[str] = None


@dataclass
class Delta:
    """What a single input changed, beyond the frames it produced."""

    transitions: list[tuple[int, SessionState, SessionState]] = field(default_factory=list)
    delivered: list[InboxMessage] = field(default_factory=list)
    matches: list[tuple[str, RelevanceScore]] = field(default_factory=list)
    acked: list[tuple[int, int]] = field(default_factory=list)
    dropped: bool = False


class NodeEngine:
    def __init__(
        self,
        node_id: int,
        profile: Profile,
        taxonomy: Taxonomy,
        params: Optional[ProtocolParams] = None,
        store: Optional[ContentStore] = None,
        graph: Optional[SocialGraph] = None,
    ):
        _check_u64("node_id", node_id)
        if node_id == BROADCAST:
            raise ValueError("node id may not be the broadcast address")
        profile.validate(taxonomy)
        self.node_id = node_id
        self.profile = profile
        self.taxonomy = taxonomy
        self.params = params or ProtocolParams()
        self.store = store if store is not None else ContentStore(self.params.store_capacity)
        self.graph = graph if graph is not None else SocialGraph()
        if profile.person_id not in self.graph.prosumers:
            self.graph.incarnate(profile)
        self.location = profile.context.location
        self.clock = 0.0
        self.last_beacon: Optional[float] = None
        self.sessions: dict[int, PeerSession] = {}
        self.sync = SyncState()
        self.inbox: list[InboxMessage] = []
        self.match_results: dict[str, RelevanceScore] = {}
        self.groups: dict[str, dict[str, Any]] = {}
        self.history: list[tuple[float, int, SessionState, SessionState]] = []
        self.prefer_wide = False
        self.wide_up = True
        self.wide_probe: Optional[Callable[[float], bool]] = None
        self.last_probe: Optional[float] = None
        self.decode_errors = 0
        self.evictions: list[int] = []
        self._bcast_seq = 0
        self._entry_ids = 0

    def __repr__(self) -> str:
        return f"NodeEngine({self.node_id}, {self.profile.name!r})"

    @property
    def person_id(self) -> str:
        return self.profile.person_id

    # -- helpers -------------------------------------------------------------

    def session(self, peer: int) -> PeerSession:
        s = self.sessions.get(peer)
        if s is None:
            s = self.sessions[peer] = PeerSession(peer)
        return s

    def _advance(self, now: float) -> None:
        if now < self.clock:
            raise ValueError(f"time went backwards: {now} < {self.clock}")
        self.clock = now

    def _emit(self, kind: FrameKind, dst: int, body: dict[str, Any]) -> Frame:
        return self._emit_raw(kind, dst, encode_payload(body))

    def _emit_raw(self, kind: FrameKind, dst: int, payload: bytes) -> Frame:
        if dst == BROADCAST:
            self._bcast_seq += 1
            seq = self._bcast_seq
        else:
            s = self.session(dst)
            s.send_seq += 1
            seq = s.send_seq
        return Frame(kind, self.node_id, dst, seq, payload)

    def _set_state(self, s: PeerSession, new: SessionState, delta: Optional[Delta]) -> None:
        old = s.state
        if old == new:
            return
        s.state = new
        if new < SessionState.PROFILE_EXCHANGED:
            s.peer_profile = None
        self.history.append((self.clock, s.peer, old, new))
        if delta is not None:
            delta.transitions.append((s.peer, old, new))

    def profile_now(self) -> Profile:
        """Own profile with the current location folded into the dynamic context."""
        ctx = self.profile.context
        if ctx.location == self.location:
            return self.profile
        return replace(self.profile, context=replace(ctx, location=self.location))

    def transport_preference(self, dst: int) -> tuple[str, ...]:
        if dst == BROADCAST:
            return (SHORT_RANGE,)
        s = self.sessions.get(dst)
        online = self.prefer_wide or (s is not None and s.peer_online)
        if online and self.wide_up:
            return (WIDE_AREA, SHORT_RANGE)
        return (SHORT_RANGE,)

    def reachable(self, peer: int) -> bool:
        s = self.sessions.get(peer)
        if s is None:
            return False
        if s.state >= SessionState.PROFILE_EXCHANGED:
            return True
        online = self.prefer_wide or s.peer_online
        return online and self.wide_up and s.ever_exchanged

    def _contact(self, s: PeerSession) -> None:
        s.attempts.clear()
        s.last_tx.clear()

    def _flush(self, peer: int, now: float) -> list[Frame]:
        """(Re)transmit this peer's unacknowledged data that is due."""
        if not self.reachable(peer):
            return []
        s = self.sessions[peer]
        limit = 1 + self.params.retry_limit
        frames = []
        for entry in self.store.pending_for(peer, self.sync):
            n = entry.seq
            tries = s.attempts.get(n, 0)
            if tries >= limit:
                continue
            if tries and now - s.last_tx[n] < self.params.retry_interval - _EPS:
                continue
            s.attempts[n] = tries + 1
            s.last_tx[n] = now
            self.store.get(entry.entry_id, now)
            frames.append(self._emit_raw(FrameKind[entry.kind], peer, entry.payload))
        return frames

    def _queue_data(self, peer: int, kind: FrameKind, body: dict[str, Any], now: float) -> list[Frame]:
        s = self.session(peer)
        n = s.next_msg + 1
        payload = encode_payload({**body, "n": n, "sent_at": now})
        if len(payload) > self.params.max_payload:
            raise PayloadTooLarge(f"encoded payload of {len(payload)} bytes exceeds {self.params.max_payload}")
        self._entry_ids += 1
        entry = StoreEntry(
            self._entry_ids, payload, origin=self.person_id, created_at=now, dest=peer, seq=n, kind=kind.name
        )
        self.evictions.extend(self.store.put(entry))
        s.next_msg = n
        return self._flush(peer, now)

    def drain_evictions(self) -> list[int]:
        out, self.evictions = self.evictions, []
        return out

    # -- inputs --------------------------------------------------------------

    def on_tick(self, now: float) -> list[Frame]:
        self._advance(now)
        p = self.params
        frames = []
        if self.last_beacon is None or now - self.last_beacon >= p.beacon_interval - _EPS:
            self.last_beacon = now
            frames.append(
                self._emit(
                    FrameKind.BEACON,
                    BROADCAST,
                    {"person_id": self.person_id, "name": self.profile.name, "location": _loc(self.location)},
                )
            )
        for s in self.sessions.values():
            if s.state != SessionState.IDLE and now - s.last_seen > p.session_timeout:
                self._set_state(s, SessionState.IDLE, None)
        if not self.wide_up and self.wide_probe is not None:
            if self.last_probe is None or now - self.last_probe >= p.beacon_interval - _EPS:
                self.last_probe = now
                if self.wide_probe(now):
                    self.on_link_status(True, now)
        self.store.expire(now)
        for peer in list(self.sessions):
            frames.extend(self._flush(peer, now))
        return frames

    def on_link_status(self, wide_up: bool, now: float) -> None:
        """The simulator's report on the wide-area link."""
        self._advance(now)
        self.wide_up = wide_up
        if wide_up:
            for s in self.sessions.values():
                self._contact(s)
        else:
            self.last_probe = now

    def on_bytes(self, data: bytes, now: float, transport: Optional[str] = None) -> tuple[Delta, list[Frame]]:
        try:
            frame = decode_frame(data, self.params.max_payload)
        except DecodeError:
            self.decode_errors += 1
            self._advance(now)
            return Delta(dropped=True), []
        return self.on_frame(frame, now, transport)

    def on_frame(self, frame: Frame, now: float, transport: Optional[str] = None) -> tuple[Delta, list[Frame]]:
        self._advance(now)
        delta = Delta()
        if frame.dst not in (self.node_id, BROADCAST) or frame.src == self.node_id:
            delta.dropped = True
            return delta, []
        try:
            body = decode_payload(frame.payload)
        except DecodeError:
            self.decode_errors += 1
            delta.dropped = True
            return delta, []
        s = self.session(frame.src)
        s.last_seen = now
        s.recv_seq = max(s.recv_seq, frame.seq)
        if transport == WIDE_AREA:
            s.peer_online = True
        try:
            handler = _HANDLERS[frame.kind]
        except KeyError:
            raise UnknownKind(f"unhandled frame kind {frame.kind!r}") from None
        try:
            frames = handler(self, s, body, now, delta)
        except (MymError, KeyError, TypeError, ValueError):
            # Malformed payload for its kind: drop and count like any decode failure.
            self.decode_errors += 1
            delta.dropped = True
            return delta, []
        return delta, frames

    def _on_beacon(self, s, body, now, delta):
        loc = body.get("location")
        s.location = tuple(loc) if loc is not None else None
        if s.state == SessionState.IDLE:
            self._set_state(s, SessionState.DISCOVERED, delta)
            return [self._emit(FrameKind.PROFILE_REQ, s.peer, {})]
        if s.state == SessionState.DISCOVERED:
            # handshake still pending: ask again
            return [self._emit(FrameKind.PROFILE_REQ, s.peer, {})]
        return []

    def _on_profile_req(self, s, body, now, delta):
        frames = [self._emit(FrameKind.PROFILE_RESP, s.peer, {"profile": profile_to_dict(self.profile_now())})]
        if s.state == SessionState.IDLE:
            self._set_state(s, SessionState.DISCOVERED, delta)
            frames.append(self._emit(FrameKind.PROFILE_REQ, s.peer, {}))
        return frames

    def _on_profile_resp(self, s, body, now, delta):
        profile = profile_from_dict(body["profile"], self.taxonomy)
        if s.state == SessionState.IDLE:
            self._set_state(s, SessionState.DISCOVERED, delta)
            return [self._emit(FrameKind.PROFILE_REQ, s.peer, {})]
        s.peer_profile = profile
        if s.state != SessionState.DISCOVERED:
            return []
        self._set_state(s, SessionState.PROFILE_EXCHANGED, delta)
        s.peer_profile = profile
        s.ever_exchanged = True
        if profile.person_id not in self.graph.prosumers:
            self.graph.clock = now
            self.graph.incarnate(profile)
        self._contact(s)
        frames = [self._emit(FrameKind.SYNC, s.peer, {"delivered": s.delivered})]
        return frames + self._flush(s.peer, now)

    def _on_data(self, s, body, now, delta, kind):
        n = int(body["n"])
        if n < 1:
            raise ValueError("data number must be positive")
        group_ops = []
        if n > s.delivered and n not in s.reorder:
            s.reorder[n] = (kind, body)
            while s.delivered + 1 in s.reorder:
                k, b = s.reorder.pop(s.delivered + 1)
                s.delivered += 1
                if k == FrameKind.CHAT:
                    msg = InboxMessage(s.peer, s.delivered, b["text"], float(b["sent_at"]), now, b.get("group"))
                    self.inbox.append(msg)
                    delta.delivered.append(msg)
                else:
                    group_ops.append(b)
        frames = [self._emit(FrameKind.ACK, s.peer, {"ack": s.delivered})]
        for b in group_ops:
            frames.extend(self._apply_group_op(s.peer, b, now))
        if s.state == SessionState.PROFILE_EXCHANGED:
            self._set_state(s, SessionState.CONNECTED, delta)
        elif s.state == SessionState.IDLE:
            self._set_state(s, SessionState.DISCOVERED, delta)
            frames.append(self._emit(FrameKind.PROFILE_REQ, s.peer, {}))
        return frames

    def _on_chat(self, s, body, now, delta):
        return self._on_data(s, body, now, delta, FrameKind.CHAT)

    def _on_group_op(self, s, body, now, delta):
        return self._on_data(s, body, now, delta, FrameKind.GROUP_OP)

    def _acknowledge(self, s: PeerSession, upto: int, delta: Delta) -> None:
        before = self.sync.acked(s.peer)
        after = self.sync.ack(s.peer, upto)
        if after > before:
            delta.acked.append((s.peer, after))
            for entry in list(self.store):
                if entry.dest == s.peer and entry.seq <= after:
                    self.store.remove(entry.entry_id)
                    s.attempts.pop(entry.seq, None)
                    s.last_tx.pop(entry.seq, None)

    def _on_ack(self, s, body, now, delta):
        self._acknowledge(s, int(body["ack"]), delta)
        if s.state == SessionState.PROFILE_EXCHANGED:
            self._set_state(s, SessionState.CONNECTED, delta)
        return []

    def _on_sync(self, s, body, now, delta):
        self._acknowledge(s, int(body["delivered"]), delta)
        self._contact(s)
        return self._flush(s.peer, now)

    def _on_friend_search(self, s, body, now, delta):
        if not self.profile.interests:
            return []
        query = Profile(
            person_id=str(body["person_id"]),
            name=str(body["name"]),
            interests=frozenset(int(c) for c in body["interests"]),
        )
        loc = body.get("location")
        d = planar_distance(self.location, tuple(loc) if loc is not None else None)
        score = relevance(self.profile, query, d, self.taxonomy, self.params.match)
        reply = {
            "person_id": self.person_id,
            "name": self.profile.name,
            "score": score.to_dict(),
            "classification": str(is_match(score, self.params.match)),
        }
        return [self._emit(FrameKind.MATCH_RESULT, s.peer, reply)]

    def _on_match_result(self, s, body, now, delta):
        score = RelevanceScore.from_dict(body["score"])
        person = str(body["person_id"])
        self.match_results[person] = score
        delta.matches.append((person, score))
        return []

    def _on_platform_req(self, s, body, now, delta):
        s.peer_online = True
        return []

    # -- local actions -------------------------------------------------------

    def send_chat(self, peer: int, text: str, now: Optional[float] = None, group: Optional[str] = None) -> list[Frame]:
        """Queue a chat message; frames come back only if the peer is reachable now."""
        now = self.clock if now is None else now
        self._advance(now)
        if not text:
            raise EmptyMessage("chat text is empty")
        if peer in (self.node_id, BROADCAST):
            raise ValueError("chat needs a unicast peer other than this node")
        body: dict[str, Any] = {"text": text}
        if group is not None:
            body["group"] = group
        return self._queue_data(peer, FrameKind.CHAT, body, now)

    def friend_search(self, now: Optional[float] = None) -> Frame:
        now = self.clock if now is None else now
        self._advance(now)
        if not self.profile.interests:
            raise EmptyInterests("a friend search needs at least one interest")
        self.match_results.clear()
        return self._emit(
            FrameKind.FRIEND_SEARCH,
            BROADCAST,
            {
                "person_id": self.person_id,
                "name": self.profile.name,
                "interests": sorted(self.profile.interests),
                "location": _loc(self.location),
            },
        )

    def ranked_matches(self) -> list[tuple[str, RelevanceScore]]:
        return rank_scores(self.match_results.items())

    def platform_request(self, now: Optional[float] = None) -> list[Frame]:
        """Prefer the wide-area link for unicast traffic from now on and tell known peers."""
        now = self.clock if now is None else now
        self._advance(now)
        self.prefer_wide = True
        frames = []
        for peer, s in self.sessions.items():
            if s.ever_exchanged:
                frames.append(self._emit(FrameKind.PLATFORM_REQ, peer, {"person_id": self.person_id}))
            self._contact(s)
        return frames

    def form_group(self, name: str, now: Optional[float] = None) -> None:
        now = self.clock if now is None else now
        self._advance(now)
        if name in self.groups:
            raise ValueError(f"group {name!r} already known to this node")
        self.graph.clock = now
        self.graph.form_group(self.person_id, name)
        self.groups[name] = {"owner": self.node_id, "members": {self.node_id}}

    def join_group(self, owner: int, name: str, now: Optional[float] = None) -> list[Frame]:
        now = self.clock if now is None else now
        self._advance(now)
        return self._queue_data(owner, FrameKind.GROUP_OP, {"op": "join", "group": name}, now)

    def send_group_chat(self, name: str, text: str, now: Optional[float] = None) -> list[Frame]:
        """Fan a chat out to every other member of the group, one unicast stream each."""
        group = self.groups.get(name)
        if group is None:
            raise ValueError(f"not a member of group {name!r}")
        frames = []
        for member in sorted(group["members"]):
            if member != self.node_id:
                frames.extend(self.send_chat(member, text, now, group=name))
        return frames

    def _apply_group_op(self, peer: int, body: dict[str, Any], now: float) -> list[Frame]:
        op, name = body.get("op"), body.get("group")
        group = self.groups.get(name)
        if op == "join":
            if group is None or group["owner"] != self.node_id or peer in group["members"]:
                return []
            group["members"].add(peer)
            s = self.sessions[peer]
            if s.peer_profile is not None and s.peer_profile.person_id in self.graph.prosumers:
                self.graph.clock = now
                self.graph.join_group(s.peer_profile.person_id, self.graph.group_by_name(name).group_id)
            roster = {"op": "roster", "group": name, "owner": self.node_id, "members": sorted(group["members"])}
            frames = []
            for member in sorted(group["members"]):
                if member != self.node_id:
                    frames.extend(self._queue_data(member, FrameKind.GROUP_OP, roster, now))
            return frames
        if op == "roster":
            self.groups[name] = {"owner": int(body["owner"]), "members": {int(m) for m in body["members"]}}
        return []


_HANDLERS = {
    FrameKind.BEACON: NodeEngine._on_beacon,
    FrameKind.PROFILE_REQ: NodeEngine._on_profile_req,
    FrameKind.PROFILE_RESP: NodeEngine._on_profile_resp,
    FrameKind.CHAT: NodeEngine._on_chat,
    FrameKind.GROUP_OP: NodeEngine._on_group_op,
    FrameKind.ACK: NodeEngine._on_ack,
    FrameKind.SYNC: NodeEngine._on_sync,
    FrameKind.FRIEND_SEARCH: NodeEngine._on_friend_search,
    FrameKind.MATCH_RESULT: NodeEngine._on_match_result,
    FrameKind.PLATFORM_REQ: NodeEngine._on_platform_req,
}


def _loc(location: Optional[tuple[float, float]]) -> Optional[list[float]]:
    return None if location is None else [location[0], location[1]]
