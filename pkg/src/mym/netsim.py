"""Deterministic discrete-event simulator for the protocol engines.

Time is kept internally in integer milliseconds; logs and engines see
seconds.  Events at the same instant run in this order:

1. wide-area outage boundaries,
2. frame deliveries, by (sender node id, sender emission counter),
3. scripted user actions, in file order,
4. the periodic tick: node movement, then every engine in node-id order.

Short-range links follow the unit-disk model; the wide-area link is up
outside the configured outage intervals.  One ``random.Random`` seeded from
the scenario drives loss, duplication and optional jitter, drawn in event
order and only when the corresponding knob is non-zero.
"""

from __future__ import annotations

import copy
import csv
import heapq
import io
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from .contentstore import ContentStore
from .errors import ConfigError, MymError, UnknownNode
from .matchmaking import MatchParams, Profile, is_match, profile_from_dict
from .ontology import Taxonomy, load_taxonomy, sample_taxonomy
from .protocol import BROADCAST, SHORT_RANGE, WIDE_AREA, Frame, FrameKind, NodeEngine, ProtocolParams, encode_frame

NONE = "none"
TRANSPORTS = (SHORT_RANGE, WIDE_AREA, NONE)

EVENT_KINDS = (
    "FrameSent",
    "FrameDelivered",
    "FrameDropped",
    "NodeMoved",
    "OutageStart",
    "OutageEnd",
    "MatchFound",
    "ChatDelivered",
    "StoreEvicted",
)

ACTIONS = ("chat", "friend_search", "platform_request", "form_group", "join_group", "group_chat")

_OUTAGE, _DELIVERY, _ACTION, _TICK = range(4)


@dataclass(frozen=True)
class NodeConfig:
    node_id: int
    profile: Profile
    position: tuple[float, float] = (0.0, 0.0)
    # (time s, x, y), strictly increasing in time
    waypoints: tuple[tuple[float, float, float], ...] = ()


@dataclass(frozen=True)
class ScriptAction:
    at: float
    node: int
    action: str
    args: dict[str, Any] = field(default_factory=dict)


@dataclass
class ScenarioConfig:
    seed: int = 0
    radio_range: float = 30.0
    short_latency: float = 20.0
    wide_latency: float = 120.0
    loss_prob: float = 0.0
    dup_prob: float = 0.0
    jitter: float = 0.0
    tick: float = 100.0
    duration: float = 30.0
    nodes: list[NodeConfig] = field(default_factory=list)
    wide_area_outages: list[tuple[float, float]] = field(default_factory=list)
    script: list[ScriptAction] = field(default_factory=list)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    taxonomy: Taxonomy = field(default_factory=sample_taxonomy)
    name: str = ""

    def __post_init__(self):
        validate(self)

    def node(self, node_id: int) -> NodeConfig:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise UnknownNode(f"unknown node {node_id}")


# --- configuration ----------------------------------------------------------

_SCALARS = {
    "seed": int,
    "radio_range": float,
    "short_latency": float,
    "wide_latency": float,
    "loss_prob": float,
    "dup_prob": float,
    "jitter": float,
    "tick": float,
    "duration": float,
}


def validate(cfg: ScenarioConfig) -> None:
    """Raise :class:`ConfigError` naming the first offending field."""
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {cfg.seed}")
    if not cfg.radio_range > 0:
        raise ConfigError(f"radio_range: must be positive, got {cfg.radio_range}")
    for name in ("short_latency", "wide_latency", "jitter"):
        v = getattr(cfg, name)
        if not (v >= 0 and math.isfinite(v)):
            raise ConfigError(f"{name}: must be a non-negative number of milliseconds, got {v}")
    for name in ("loss_prob", "dup_prob"):
        v = getattr(cfg, name)
        if not 0 <= v < 1:
            raise ConfigError(f"{name}: must lie in [0, 1), got {v}")
    if not (cfg.tick > 0 and math.isfinite(cfg.tick)):
        raise ConfigError(f"tick: must be a positive number of milliseconds, got {cfg.tick}")
    if not (cfg.duration > 0 and math.isfinite(cfg.duration)):
        raise ConfigError(f"duration: must be positive, got {cfg.duration}")
    ids = set()
    for i, n in enumerate(cfg.nodes):
        if not 0 <= n.node_id < BROADCAST:
            raise ConfigError(f"nodes[{i}].id: {n.node_id} is not a valid node id")
        if n.node_id in ids:
            raise ConfigError(f"nodes[{i}].id: duplicate node id {n.node_id}")
        ids.add(n.node_id)
        try:
            n.profile.validate(cfg.taxonomy)
        except MymError as exc:
            raise ConfigError(f"nodes[{i}].profile: {exc}") from None
        last = 0.0
        for j, (t, _, _) in enumerate(n.waypoints):
            if not t > last:
                raise ConfigError(f"nodes[{i}].waypoints[{j}]: times must be positive and increasing")
            last = t
    prev_end = -math.inf
    prev = None
    for i, (start, end) in enumerate(cfg.wide_area_outages):
        if not start < end:
            raise ConfigError(f"wide_area_outages[{i}]: interval [{start}, {end}) is empty or reversed")
        if start < prev_end:
            raise ConfigError(
                f"wide_area_outages[{i}]: interval [{start}, {end}) overlaps or precedes "
                f"[{prev[0]}, {prev[1]})"
            )
        prev_end, prev = end, (start, end)
    for i, a in enumerate(cfg.script):
        where = f"script[{i}]"
        if a.action not in ACTIONS:
            raise ConfigError(f"{where}.action: unknown action {a.action!r}")
        if a.node not in ids:
            raise ConfigError(f"{where}.node: unknown node {a.node}")
        if not 0 <= a.at <= cfg.duration:
            raise ConfigError(f"{where}.at: {a.at} outside [0, duration]")
        required = {
            "chat": ("to", "text"),
            "form_group": ("name",),
            "join_group": ("owner", "name"),
            "group_chat": ("group", "text"),
        }.get(a.action, ())
        for key in required:
            if key not in a.args:
                raise ConfigError(f"{where}.args.{key}: required for {a.action}")
        for key in ("to", "owner"):
            if key in a.args and a.args[key] not in ids:
                raise ConfigError(f"{where}.args.{key}: unknown node {a.args[key]}")


def _num(d: dict, key: str, kind, where: str = ""):
    try:
        return kind(d[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{where}{key}: expected a number, got {d[key]!r}") from None


def _load_profile_ref(ref: Any, base: Path, t: Taxonomy, where: str) -> Profile:
    try:
        if isinstance(ref, str):
            candidates = [base / ref, Path(__file__).parent / "data" / ref]
            path = next((p for p in candidates if p.is_file()), None)
            if path is None:
                raise ConfigError(f"{where}: profile file {ref!r} not found")
            ref = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(ref, dict):
            raise ConfigError(f"{where}: expected a profile object or path")
        return profile_from_dict(ref, t)
    except ConfigError:
        raise
    except (MymError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def apply_overrides(doc: dict[str, Any], overrides: Sequence[str]) -> dict[str, Any]:
    """Apply ``key=value`` overrides; values parse as JSON when possible, dots descend."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = doc
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"override {item!r}: {part} is not an object")
        target[parts[-1]] = value
    return doc


def scenario_from_dict(doc: dict[str, Any], base_dir: str | Path = ".") -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario: top level must be a JSON object")
    base = Path(base_dir)
    known = set(_SCALARS) | {"nodes", "wide_area_outages", "script", "protocol", "match", "store_capacity",
                             "taxonomy", "name", "description"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{key}: unknown scenario field")
    kwargs: dict[str, Any] = {}
    for key, kind in _SCALARS.items():
        if key in doc:
            kwargs[key] = _num(doc, key, kind)

    tax_ref = doc.get("taxonomy")
    if tax_ref is None:
        t = sample_taxonomy()
    else:
        path = base / tax_ref
        if not path.is_file():
            path = Path(__file__).parent / "data" / tax_ref
        try:
            t = load_taxonomy(path.read_text(encoding="utf-8"))
        except OSError:
            raise ConfigError(f"taxonomy: cannot read {tax_ref!r}") from None
        except MymError as exc:
            raise ConfigError(f"taxonomy: {exc}") from None

    try:
        match = MatchParams(**doc.get("match", {}))
        proto = dict(doc.get("protocol", {}))
        if "store_capacity" in doc:
            proto["store_capacity"] = doc["store_capacity"]
        protocol = ProtocolParams(match=match, **proto)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"protocol: {exc}") from None

    nodes = []
    for i, nd in enumerate(doc.get("nodes", [])):
        where = f"nodes[{i}]"
        if "id" not in nd:
            raise ConfigError(f"{where}.id: missing")
        try:
            pos = tuple(float(v) for v in nd.get("position", (0.0, 0.0)))
            wps = tuple((float(w[0]), float(w[1]), float(w[2])) for w in nd.get("waypoints", []))
            if len(pos) != 2:
                raise ValueError
        except (TypeError, ValueError, IndexError):
            raise ConfigError(f"{where}.position: expected [x, y] and waypoints [[t, x, y], ...]") from None
        profile = _load_profile_ref(nd.get("profile"), base, t, f"{where}.profile")
        nodes.append(NodeConfig(int(nd["id"]), profile, pos, wps))

    outages = []
    for i, iv in enumerate(doc.get("wide_area_outages", [])):
        try:
            start, end = (float(v) for v in iv)
        except (TypeError, ValueError):
            raise ConfigError(f"wide_area_outages[{i}]: expected [start, end]") from None
        outages.append((start, end))

    script = []
    for i, a in enumerate(doc.get("script", [])):
        try:
            args = {k: v for k, v in a.items() if k not in ("at", "node", "action")}
            script.append(ScriptAction(float(a["at"]), int(a["node"]), str(a["action"]), args))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"script[{i}]: needs at, node and action") from None

    return ScenarioConfig(
        nodes=nodes,
        wide_area_outages=outages,
        script=script,
        protocol=protocol,
        taxonomy=t,
        name=str(doc.get("name", "")),
        **kwargs,
    )


def load_scenario(path: str | Path, overrides: Sequence[str] = ()) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"scenario: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(apply_overrides(doc, overrides), path.parent)


def bundled_scenarios() -> list[Path]:
    return sorted((Path(__file__).parent / "data" / "scenarios").glob("*.json"))


# --- geometry and links -----------------------------------------------------


def position_at(node: NodeConfig, t: float) -> tuple[float, float]:
    """Piecewise-linear position along the waypoints; stationary after the last."""
    prev_t, (px, py) = 0.0, node.position
    for wt, wx, wy in node.waypoints:
        if t < wt:
            f = (t - prev_t) / (wt - prev_t) if t > prev_t else 0.0
            return (px + f * (wx - px), py + f * (wy - py))
        prev_t, px, py = wt, wx, wy
    return (px, py)


def move_node(cfg: ScenarioConfig, node_id: int, t: float) -> tuple[float, float]:
    return position_at(cfg.node(node_id), t)


def in_outage(cfg: ScenarioConfig, t: float) -> bool:
    return any(start <= t < end for start, end in cfg.wide_area_outages)


def available_transports(
    cfg: ScenarioConfig, positions: dict[int, tuple[float, float]], src: int, dst: int, t: float
) -> frozenset[str]:
    for n in (src, dst):
        if n not in positions:
            raise UnknownNode(f"unknown node {n}")
    out = set()
    (x1, y1), (x2, y2) = positions[src], positions[dst]
    if math.hypot(x1 - x2, y1 - y2) <= cfg.radio_range:
        out.add(SHORT_RANGE)
    if not in_outage(cfg, t):
        out.add(WIDE_AREA)
    return frozenset(out)


def deliverable(
    cfg: ScenarioConfig,
    positions: dict[int, tuple[float, float]],
    src: int,
    dst: int,
    t: float,
    preference: Sequence[str] = (SHORT_RANGE, WIDE_AREA),
) -> str:
    """The first transport in ``preference`` that can carry src -> dst at time t, else ``"none"``."""
    avail = available_transports(cfg, positions, src, dst, t)
    for transport in preference:
        if transport in avail:
            return transport
    return NONE


# --- the event loop ---------------------------------------------------------


@dataclass
class MetricsReport:
    nodes: int = 0
    frames_sent: dict[str, int] = field(default_factory=lambda: dict.fromkeys(TRANSPORTS, 0))
    frames_delivered: dict[str, int] = field(default_factory=lambda: dict.fromkeys(TRANSPORTS, 0))
    frames_dropped: dict[str, int] = field(default_factory=lambda: dict.fromkeys(TRANSPORTS, 0))
    chats_sent: int = 0
    chats_delivered: int = 0
    chat_latency_min: float = 0.0
    chat_latency_mean: float = 0.0
    chat_latency_max: float = 0.0
    matches: list[tuple[int, str, float]] = field(default_factory=list)
    store_evictions: int = 0

    @property
    def matches_found(self) -> int:
        return len(self.matches)

    @property
    def best_relevance(self) -> float:
        return max((m[2] for m in self.matches), default=0.0)


CSV_COLUMNS = (
    ["nodes"]
    + [f"frames_{what}_{tr}" for what in ("sent", "delivered", "dropped") for tr in TRANSPORTS]
    + [
        "chats_sent",
        "chats_delivered",
        "chat_latency_min",
        "chat_latency_mean",
        "chat_latency_max",
        "matches_found",
        "best_relevance",
        "store_evictions",
    ]
)


def metrics(log: Sequence[dict[str, Any]], nodes: Optional[int] = None) -> MetricsReport:
    r = MetricsReport()
    latencies = []
    chats = set()
    seen_nodes = set()
    for ev in log:
        kind = ev["kind"]
        if kind == "FrameSent":
            r.frames_sent[ev["transport"]] += 1
            seen_nodes.add(ev["src"])
            if ev["frame"] == "CHAT" and "n" in ev:
                chats.add((ev["src"], ev["dst"], ev["n"]))
        elif kind == "FrameDelivered":
            r.frames_delivered[ev["transport"]] += 1
        elif kind == "FrameDropped":
            r.frames_dropped[ev["transport"]] += 1
        elif kind == "ChatDelivered":
            r.chats_delivered += 1
            latencies.append(ev["latency"])
        elif kind == "MatchFound":
            r.matches.append((ev["node"], ev["person_id"], ev["value"]))
        elif kind == "StoreEvicted":
            r.store_evictions += len(ev["entries"])
    r.chats_sent = len(chats)
    r.nodes = len(seen_nodes) if nodes is None else nodes
    if latencies:
        r.chat_latency_min = min(latencies)
        r.chat_latency_max = max(latencies)
        r.chat_latency_mean = math.fsum(latencies) / len(latencies)
    return r


def metrics_csv(report: MetricsReport) -> str:
    row: dict[str, Any] = {"nodes": report.nodes}
    for what, table in (("sent", report.frames_sent), ("delivered", report.frames_delivered),
                        ("dropped", report.frames_dropped)):
        for tr in TRANSPORTS:
            row[f"frames_{what}_{tr}"] = table[tr]
    row.update(
        chats_sent=report.chats_sent,
        chats_delivered=report.chats_delivered,
        chat_latency_min=f"{report.chat_latency_min:.6f}",
        chat_latency_mean=f"{report.chat_latency_mean:.6f}",
        chat_latency_max=f"{report.chat_latency_max:.6f}",
        matches_found=report.matches_found,
        best_relevance=f"{report.best_relevance:.6f}",
        store_evictions=report.store_evictions,
    )
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerow(row)
    return buf.getvalue()


def dump_events(log: Sequence[dict[str, Any]]) -> str:
    return "".join(json.dumps(ev, sort_keys=True, ensure_ascii=False) + "\n" for ev in log)


class Simulator:
    """One scenario run.  Use :func:`run` unless you need to inspect engines afterwards."""

    def __init__(self, cfg: ScenarioConfig):
        validate(cfg)
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.log: list[dict[str, Any]] = []
        self.engines: dict[int, NodeEngine] = {}
        self.positions: dict[int, tuple[float, float]] = {}
        for n in sorted(cfg.nodes, key=lambda n: n.node_id):
            store = ContentStore(cfg.protocol.store_capacity)
            eng = NodeEngine(n.node_id, n.profile, cfg.taxonomy, cfg.protocol, store)
            eng.location = n.position
            eng.wide_probe = self._probe
            self.engines[n.node_id] = eng
            self.positions[n.node_id] = n.position
        self._heap: list[tuple] = []
        self._emitted: dict[int, int] = {}
        self._now = 0
        self._done = False

    @property
    def now(self) -> float:
        return self._now / 1000.0

    def _probe(self, t: float) -> bool:
        return not in_outage(self.cfg, t)

    def _record(self, kind: str, **details: Any) -> None:
        self.log.append({"i": len(self.log), "t": self._now / 1000.0, "kind": kind, **details})

    def _push(self, t_ms: int, klass: int, key: int, counter: int, item: Any) -> None:
        heapq.heappush(self._heap, (t_ms, klass, key, counter, item))

    def _ms(self, seconds: float) -> int:
        return int(round(seconds * 1000))

    # -- frames ------------------------------------------------------------

    def _dispatch(self, frames: Sequence[Frame]) -> None:
        for frame in frames:
            data = encode_frame(frame, self.cfg.protocol.max_payload)
            src = frame.src
            if frame.dst == BROADCAST:
                receivers = [
                    n for n in self.engines
                    if n != src and SHORT_RANGE in available_transports(self.cfg, self.positions, src, n, self.now)
                ]
                if not receivers:
                    self._record("FrameSent", **self._frame_info(frame, BROADCAST, SHORT_RANGE, data))
                    self._record("FrameDropped", reason="no_neighbors",
                                 **self._frame_info(frame, BROADCAST, SHORT_RANGE, data))
                for r in receivers:
                    self._transmit(frame, data, r, SHORT_RANGE)
                continue
            if frame.dst not in self.engines:
                self._record("FrameSent", **self._frame_info(frame, frame.dst, NONE, data))
                self._record("FrameDropped", reason="unknown_destination",
                             **self._frame_info(frame, frame.dst, NONE, data))
                continue
            pref = self.engines[src].transport_preference(frame.dst)
            transport = deliverable(self.cfg, self.positions, src, frame.dst, self.now, pref)
            if transport == NONE:
                self._record("FrameSent", **self._frame_info(frame, frame.dst, NONE, data))
                self._record("FrameDropped", reason="no_route", **self._frame_info(frame, frame.dst, NONE, data))
                continue
            self._transmit(frame, data, frame.dst, transport)

    def _frame_info(self, frame: Frame, dst: int, transport: str, data: bytes) -> dict[str, Any]:
        info = {
            "frame": frame.kind.name,
            "src": frame.src,
            "dst": dst,
            "seq": frame.seq,
            "transport": transport,
            "bytes": len(data),
        }
        if frame.dst == BROADCAST:
            info["broadcast"] = True
        if frame.kind in (FrameKind.CHAT, FrameKind.GROUP_OP, FrameKind.ACK):
            body = frame.body()
            if "n" in body:
                info["n"] = body["n"]
            if "ack" in body:
                info["ack"] = body["ack"]
        return info

    def _transmit(self, frame: Frame, data: bytes, dst: int, transport: str, duplicate: bool = False) -> None:
        info = self._frame_info(frame, dst, transport, data)
        if duplicate:
            info["duplicate"] = True
        self._record("FrameSent", **info)
        cfg = self.cfg
        if cfg.loss_prob > 0 and self.rng.random() < cfg.loss_prob:
            self._record("FrameDropped", reason="loss", **info)
        else:
            latency = cfg.short_latency if transport == SHORT_RANGE else cfg.wide_latency
            if cfg.jitter > 0:
                latency += self.rng.uniform(0.0, cfg.jitter)
            counter = self._emitted.get(frame.src, 0)
            self._emitted[frame.src] = counter + 1
            at = self._now + int(round(latency))
            self._push(at, _DELIVERY, frame.src, counter, (data, dst, transport, info))
        if not duplicate and cfg.dup_prob > 0 and self.rng.random() < cfg.dup_prob:
            self._transmit(frame, data, dst, transport, duplicate=True)

    def _deliver(self, data: bytes, dst: int, transport: str, info: dict[str, Any]) -> None:
        eng = self.engines[dst]
        self._record("FrameDelivered", **info)
        delta, frames = eng.on_bytes(data, self.now, transport)
        for msg in delta.delivered:
            self._record(
                "ChatDelivered",
                node=dst,
                src=msg.peer,
                n=msg.n,
                text=msg.text,
                group=msg.group,
                sent_at=msg.sent_at,
                latency=round(self.now - msg.sent_at, 9),
                transport=transport,
            )
        for person, score in delta.matches:
            self._record(
                "MatchFound",
                node=dst,
                peer=info["src"],
                person_id=person,
                value=score.value,
                profile_similarity=score.profile_similarity,
                proximity_factor=score.proximity_factor,
                observer_distance=score.observer_distance,
                classification=str(is_match(score, self.cfg.protocol.match)),
            )
        self._after(eng, frames)

    def _after(self, eng: NodeEngine, frames: Sequence[Frame]) -> None:
        evicted = eng.drain_evictions()
        if evicted:
            self._record("StoreEvicted", node=eng.node_id, entries=evicted)
        self._dispatch(frames)

    # -- scripted actions and ticks -----------------------------------------

    def _act(self, a: ScriptAction) -> None:
        eng = self.engines[a.node]
        now = self.now
        if a.action == "chat":
            frames = eng.send_chat(int(a.args["to"]), str(a.args["text"]), now)
        elif a.action == "friend_search":
            frames = [eng.friend_search(now)]
        elif a.action == "platform_request":
            frames = eng.platform_request(now)
        elif a.action == "form_group":
            eng.form_group(str(a.args["name"]), now)
            frames = []
        elif a.action == "join_group":
            frames = eng.join_group(int(a.args["owner"]), str(a.args["name"]), now)
        else:
            frames = eng.send_group_chat(str(a.args["group"]), str(a.args["text"]), now)
        self._after(eng, frames)

    def _tick(self) -> None:
        now = self.now
        for node_id, eng in self.engines.items():
            cfg_node = self.cfg.node(node_id)
            if cfg_node.waypoints:
                pos = position_at(cfg_node, now)
                if pos != self.positions[node_id]:
                    self.positions[node_id] = pos
                    eng.location = pos
                    self._record("NodeMoved", node=node_id, x=pos[0], y=pos[1])
        for eng in self.engines.values():
            self._after(eng, eng.on_tick(now))

    def run(self) -> tuple[list[dict[str, Any]], MetricsReport]:
        if self._done:
            raise RuntimeError("a Simulator runs once; build a new one")
        self._done = True
        cfg = self.cfg
        end = self._ms(cfg.duration)
        for i, (start, stop) in enumerate(cfg.wide_area_outages):
            self._push(self._ms(start), _OUTAGE, 0, 2 * i, ("start", start, stop))
            self._push(self._ms(stop), _OUTAGE, 0, 2 * i + 1, ("end", start, stop))
        for i, a in enumerate(cfg.script):
            self._push(self._ms(a.at), _ACTION, 0, i, a)
        if self.engines:
            self._push(0, _TICK, 0, 0, None)
        step = max(1, self._ms(cfg.tick / 1000.0))
        while self._heap and self._heap[0][0] <= end:
            t_ms, klass, _, counter, item = heapq.heappop(self._heap)
            self._now = t_ms
            if klass == _OUTAGE:
                what, start, stop = item
                if what == "start":
                    self._record("OutageStart", interval=[start, stop])
                    for eng in self.engines.values():
                        eng.on_link_status(False, self.now)
                else:
                    self._record("OutageEnd", interval=[start, stop])
            elif klass == _DELIVERY:
                self._deliver(*item)
            elif klass == _ACTION:
                self._act(item)
            else:
                self._tick()
                self._push(t_ms + step, _TICK, 0, counter + 1, None)
        return self.log, metrics(self.log, len(self.engines))

    def in_flight(self) -> dict[str, int]:
        """Frames scheduled for delivery after the end of the run, per transport."""
        out = dict.fromkeys(TRANSPORTS, 0)
        for t_ms, klass, _, _, item in self._heap:
            if klass == _DELIVERY:
                out[item[2]] += 1
        return out


def run(cfg: ScenarioConfig) -> tuple[list[dict[str, Any]], MetricsReport]:
    return Simulator(cfg).run()
