"""The social graph: prosumers, friendships, groups, content, likes, votes, bookmarks, tags.

Every successful mutation is appended to an operation log.  Replaying the
log into an empty graph (see :func:`replay`) reproduces the graph exactly,
which is why bans are soft tombstones rather than deletions.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .errors import (
    AlreadyIncarnated,
    AlreadyMember,
    BadParent,
    BannedProsumer,
    BodyTooLarge,
    DuplicateEdge,
    DuplicateGroupName,
    NotSuperProsumer,
    ReplayError,
    SelfFriendship,
    UnknownContent,
    UnknownGroup,
    UnknownProsumer,
    UnknownTarget,
)
from .matchmaking import Profile, profile_from_dict, profile_to_dict

DEFAULT_BODY_LIMIT = 16 * 1024


class Role(str, enum.Enum):
    BASIC = "basic"
    SUPER = "super"


class EdgeKind(str, enum.Enum):
    FRIEND = "friend"
    LIKE = "like"
    MEMBERSHIP = "membership"
    TAG = "tag"
    BOOKMARK = "bookmark"


class ContentKind(str, enum.Enum):
    POST = "post"
    BLOG = "blog"
    COMMENT = "comment"


@dataclass
class Prosumer:
    prosumer_id: str
    profile: Profile
    role: Role = Role.BASIC
    active: bool = True


@dataclass(frozen=True)
class SocialEdge:
    edge_id: int
    kind: EdgeKind
    src: str
    dst: str
    created_at: float = 0.0
    tag_concept: Optional[int] = None


@dataclass
class ContentNode:
    content_id: str
    author: str
    kind: ContentKind
    body: str
    parent: Optional[str] = None
    created_at: float = 0.0
    votes: dict[str, int] = field(default_factory=dict)

    @property
    def tally(self) -> int:
        return sum(self.votes.values())


@dataclass
class Group:
    group_id: str
    name: str
    owner: str
    members: set[str] = field(default_factory=set)


class SocialGraph:
    def __init__(self, body_limit: int = DEFAULT_BODY_LIMIT):
        self.body_limit = body_limit
        self.clock = 0.0
        self.prosumers: dict[str, Prosumer] = {}
        self.edges: dict[int, SocialEdge] = {}
        self.content: dict[str, ContentNode] = {}
        self.groups: dict[str, Group] = {}
        self.log: list[dict[str, Any]] = []
        self._next_edge = 1
        self._next_content = 1
        self._next_group = 1
        # (kind, src, dst, tag) -> edge id
        self._edge_index: dict[tuple, int] = {}
        self._friends: dict[str, set[str]] = {}

    # -- bookkeeping -------------------------------------------------------

    def _record(self, op: str, **args: Any) -> None:
        self.log.append({"seq": len(self.log) + 1, "at": self.clock, "op": op, "args": args})

    def _prosumer(self, pid: str) -> Prosumer:
        try:
            return self.prosumers[pid]
        except KeyError:
            raise UnknownProsumer(f"unknown prosumer {pid!r}") from None

    def _actor(self, pid: str) -> Prosumer:
        p = self._prosumer(pid)
        if not p.active:
            raise BannedProsumer(f"prosumer {pid!r} is banned")
        return p

    def _content(self, cid: str) -> ContentNode:
        try:
            return self.content[cid]
        except KeyError:
            raise UnknownContent(f"unknown content {cid!r}") from None

    def _group(self, group_id: str) -> Group:
        try:
            return self.groups[group_id]
        except KeyError:
            raise UnknownGroup(f"unknown group {group_id!r}") from None

    def _add_edge(self, kind: EdgeKind, src: str, dst: str, tag: Optional[int] = None) -> int:
        key = (kind, src, dst, tag)
        if key in self._edge_index:
            raise DuplicateEdge(f"{kind.value} edge {src!r} -> {dst!r} already exists")
        eid = self._next_edge
        self._next_edge += 1
        self.edges[eid] = SocialEdge(eid, kind, src, dst, self.clock, tag)
        self._edge_index[key] = eid
        if kind is EdgeKind.FRIEND:
            self._friends[src].add(dst)
            self._friends[dst].add(src)
        return eid

    def _drop_edge(self, eid: int) -> None:
        e = self.edges.pop(eid)
        del self._edge_index[(e.kind, e.src, e.dst, e.tag_concept)]
        if e.kind is EdgeKind.FRIEND:
            self._friends[e.src].discard(e.dst)
            self._friends[e.dst].discard(e.src)

    # -- operations --------------------------------------------------------

    def incarnate(self, profile: Profile, role: Role = Role.BASIC) -> str:
        pid = profile.person_id
        if pid in self.prosumers:
            raise AlreadyIncarnated(f"person {pid!r} already has a prosumer")
        role = Role(role)
        self.prosumers[pid] = Prosumer(pid, profile, role)
        self._friends[pid] = set()
        self._record("incarnate", profile=profile_to_dict(profile), role=role.value)
        return pid

    def befriend(self, a: str, b: str) -> int:
        if a == b:
            raise SelfFriendship("a prosumer cannot befriend itself")
        self._actor(a)
        self._actor(b)
        src, dst = min(a, b), max(a, b)
        eid = self._add_edge(EdgeKind.FRIEND, src, dst)
        self._record("befriend", a=a, b=b)
        return eid

    def like(self, p: str, c: str) -> int:
        self._actor(p)
        self._content(c)
        eid = self._add_edge(EdgeKind.LIKE, p, c)
        self._record("like", p=p, c=c)
        return eid

    def bookmark(self, p: str, c: str) -> int:
        self._actor(p)
        self._content(c)
        eid = self._add_edge(EdgeKind.BOOKMARK, p, c)
        self._record("bookmark", p=p, c=c)
        return eid

    def tag(self, p: str, c: str, concept: int) -> int:
        self._actor(p)
        self._content(c)
        eid = self._add_edge(EdgeKind.TAG, p, c, int(concept))
        self._record("tag", p=p, c=c, concept=int(concept))
        return eid

    def vote(self, p: str, c: str, v: int) -> int:
        self._actor(p)
        node = self._content(c)
        if v not in (1, -1):
            raise ValueError(f"vote must be +1 or -1, got {v!r}")
        node.votes[p] = v
        self._record("vote", p=p, c=c, v=v)
        return node.tally

    def post_content(
        self, author: str, kind: ContentKind | str, body: str, parent: Optional[str] = None
    ) -> str:
        self._actor(author)
        kind = ContentKind(kind)
        size = len(body.encode("utf-8"))
        if size > self.body_limit:
            raise BodyTooLarge(f"body of {size} bytes exceeds limit {self.body_limit}")
        if kind is ContentKind.COMMENT:
            if parent is None:
                raise BadParent("a comment needs a parent")
            if parent not in self.content:
                raise BadParent(f"parent {parent!r} does not exist")
        elif parent is not None:
            raise BadParent(f"a {kind.value} cannot have a parent")
        cid = f"c{self._next_content}"
        self._next_content += 1
        self.content[cid] = ContentNode(cid, author, kind, body, parent, self.clock)
        self._record("post_content", author=author, kind=kind.value, body=body, parent=parent)
        return cid

    def form_group(self, owner: str, name: str) -> str:
        self._actor(owner)
        if any(g.name == name for g in self.groups.values()):
            raise DuplicateGroupName(f"group name {name!r} is taken")
        gid = f"g{self._next_group}"
        self._next_group += 1
        self.groups[gid] = Group(gid, name, owner, {owner})
        self._add_edge(EdgeKind.MEMBERSHIP, owner, gid)
        self._record("form_group", owner=owner, name=name)
        return gid

    def join_group(self, p: str, group_id: str) -> set[str]:
        self._actor(p)
        g = self._group(group_id)
        if p in g.members:
            raise AlreadyMember(f"{p!r} is already in {g.name!r}")
        g.members.add(p)
        self._add_edge(EdgeKind.MEMBERSHIP, p, group_id)
        self._record("join_group", p=p, group=group_id)
        return set(g.members)

    def group_by_name(self, name: str) -> Group:
        for g in self.groups.values():
            if g.name == name:
                return g
        raise UnknownGroup(f"no group named {name!r}")

    def moderate(self, actor: str, action: str, target: str) -> list[str]:
        """Super-prosumer moderation.

        ``remove_content`` deletes the node, its comment subtree and every
        like/bookmark/tag edge on the removed nodes, returning the removed
        content ids.  ``ban`` deactivates a prosumer and returns ``[target]``.
        """
        if self._actor(actor).role is not Role.SUPER:
            raise NotSuperProsumer(f"{actor!r} is not a super prosumer")
        if action == "remove_content":
            if target not in self.content:
                raise UnknownTarget(f"no content {target!r}")
            doomed = self._subtree(target)
            gone = set(doomed)
            for eid in [eid for eid, e in self.edges.items() if e.dst in gone]:
                self._drop_edge(eid)
            for cid in doomed:
                del self.content[cid]
        elif action == "ban":
            if target not in self.prosumers:
                raise UnknownTarget(f"no prosumer {target!r}")
            self.prosumers[target].active = False
            doomed = [target]
        else:
            raise ValueError(f"unknown moderation action {action!r}")
        self._record("moderate", actor=actor, action=action, target=target)
        return doomed

    def _subtree(self, root: str) -> list[str]:
        out = [root]
        i = 0
        while i < len(out):
            out.extend(c.content_id for c in self.content.values() if c.parent == out[i])
            i += 1
        return out

    # -- queries -----------------------------------------------------------

    def neighbors(self, p: str) -> set[str]:
        self._prosumer(p)
        return set(self._friends[p])

    def degree(self, p: str) -> int:
        self._prosumer(p)
        return len(self._friends[p])

    def mutual_friends(self, a: str, b: str) -> set[str]:
        return self.neighbors(a) & self.neighbors(b)

    def likes(self, c: str) -> int:
        self._content(c)
        return sum(1 for e in self.edges.values() if e.kind is EdgeKind.LIKE and e.dst == c)

    def tally(self, c: str) -> int:
        return self._content(c).tally

    def friend_edges(self) -> list[SocialEdge]:
        return [e for e in self.edges.values() if e.kind is EdgeKind.FRIEND]

    def snapshot(self) -> dict[str, Any]:
        """Canonical, JSON-compatible view of the whole graph for comparisons."""
        return {
            "prosumers": {
                pid: {"role": p.role.value, "active": p.active, "profile": profile_to_dict(p.profile)}
                for pid, p in sorted(self.prosumers.items())
            },
            "edges": [
                [e.edge_id, e.kind.value, e.src, e.dst, e.tag_concept, e.created_at]
                for e in sorted(self.edges.values(), key=lambda e: e.edge_id)
            ],
            "content": {
                cid: {
                    "author": n.author,
                    "kind": n.kind.value,
                    "body": n.body,
                    "parent": n.parent,
                    "created_at": n.created_at,
                    "votes": dict(sorted(n.votes.items())),
                }
                for cid, n in sorted(self.content.items())
            },
            "groups": {
                gid: {"name": g.name, "owner": g.owner, "members": sorted(g.members)}
                for gid, g in sorted(self.groups.items())
            },
        }

    def dump_log(self) -> str:
        return "".join(json.dumps(entry, sort_keys=True) + "\n" for entry in self.log)


def replay(entries: Iterable[dict[str, Any]], body_limit: int = DEFAULT_BODY_LIMIT) -> SocialGraph:
    g = SocialGraph(body_limit)
    last = 0
    for entry in entries:
        seq = entry.get("seq")
        if not isinstance(seq, int) or seq <= last:
            raise ReplayError(f"sequence numbers must increase, got {seq!r} after {last}")
        last = seq
        g.clock = float(entry.get("at", 0.0))
        op, args = entry["op"], dict(entry.get("args", {}))
        if op == "incarnate":
            g.incarnate(profile_from_dict(args["profile"]), Role(args.get("role", "basic")))
        elif op == "form_group":
            g.form_group(args["owner"], args["name"])
        elif op == "join_group":
            g.join_group(args["p"], args["group"])
        elif op in ("befriend", "like", "bookmark", "tag", "vote", "post_content", "moderate"):
            getattr(g, op)(**args)
        else:
            raise ReplayError(f"unknown operation {op!r} at seq {seq}")
    return g


def load_log(text: str) -> list[dict[str, Any]]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entries.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ReplayError(f"line {lineno}: {exc.msg}") from None
    return entries
