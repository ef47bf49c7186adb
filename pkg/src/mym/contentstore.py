"""Bounded per-node local store with LRU eviction and per-peer acknowledgement state.

Eviction removes the least recently accessed entry first; ties go to the
oldest ``created_at`` and then to the smallest ``entry_id``.  Entries that
are addressed to a peer carry a per-peer sequence number, which is what
:func:`pending_for` and :class:`SyncState` operate on.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from typing import Iterator, Optional

from .errors import EntryTooLarge, MymError, NotFound

DEFAULT_CAPACITY = 1024 * 1024


@dataclass
class StoreEntry:
    entry_id: int
    payload: bytes
    origin: str = ""
    created_at: float = 0.0
    last_access: Optional[float] = None
    dest: Optional[int] = None
    seq: int = 0
    kind: str = ""

    def __post_init__(self):
        if self.last_access is None:
            self.last_access = self.created_at

    @property
    def size(self) -> int:
        return len(self.payload)

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "size": self.size,
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
            "origin": self.origin,
            "created_at": self.created_at,
            "last_access": self.last_access,
            "dest": self.dest,
            "seq": self.seq,
            "kind": self.kind,
        }


class SyncState:
    """Highest contiguous sequence acknowledged by each peer; never decreases."""

    def __init__(self):
        self._acked: dict[int, int] = {}

    def acked(self, peer: int) -> int:
        return self._acked.get(peer, 0)

    def ack(self, peer: int, seq: int) -> int:
        if seq < 0:
            raise ValueError("acknowledged sequence must be non-negative")
        cur = self._acked.get(peer, 0)
        if seq > cur:
            self._acked[peer] = cur = seq
        return cur

    def items(self):
        return sorted(self._acked.items())


class ContentStore:
    def __init__(self, capacity: int = DEFAULT_CAPACITY, ttl: float = math.inf):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.ttl = ttl
        self._entries: dict[int, StoreEntry] = {}
        self._used = 0
        self.evicted: list[int] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, entry_id: object) -> bool:
        return entry_id in self._entries

    def __iter__(self) -> Iterator[StoreEntry]:
        return iter(sorted(self._entries.values(), key=lambda e: e.entry_id))

    @property
    def used(self) -> int:
        return self._used

    def _victim(self) -> StoreEntry:
        return min(self._entries.values(), key=lambda e: (e.last_access, e.created_at, e.entry_id))

    def put(self, entry: StoreEntry) -> list[int]:
        """Insert ``entry``, evicting as needed; returns the evicted ids in eviction order."""
        if entry.size > self.capacity:
            raise EntryTooLarge(f"entry of {entry.size} bytes exceeds capacity {self.capacity}")
        if entry.entry_id in self._entries:
            raise MymError(f"entry id {entry.entry_id} already stored")
        out = []
        while self._used + entry.size > self.capacity:
            victim = self._victim()
            self._remove(victim.entry_id)
            out.append(victim.entry_id)
        self._entries[entry.entry_id] = entry
        self._used += entry.size
        self.evicted.extend(out)
        return out

    def get(self, entry_id: int, now: Optional[float] = None) -> bytes:
        entry = self._entries.get(entry_id)
        if entry is None:
            raise NotFound(f"entry {entry_id} not in store")
        if now is not None:
            entry.last_access = now
        return entry.payload

    def entry(self, entry_id: int) -> StoreEntry:
        try:
            return self._entries[entry_id]
        except KeyError:
            raise NotFound(f"entry {entry_id} not in store") from None

    def _remove(self, entry_id: int) -> StoreEntry:
        entry = self._entries.pop(entry_id)
        self._used -= entry.size
        return entry

    def remove(self, entry_id: int) -> StoreEntry:
        if entry_id not in self._entries:
            raise NotFound(f"entry {entry_id} not in store")
        return self._remove(entry_id)

    def expire(self, now: float) -> list[int]:
        """Drop entries older than the TTL; a no-op with the default infinite TTL."""
        if math.isinf(self.ttl):
            return []
        gone = [e.entry_id for e in self if now - e.created_at > self.ttl]
        for eid in gone:
            self._remove(eid)
        return gone

    def pending_for(self, peer: int, sync: SyncState) -> list[StoreEntry]:
        floor = sync.acked(peer)
        pending = [e for e in self._entries.values() if e.dest == peer and e.seq > floor]
        return sorted(pending, key=lambda e: (e.seq, e.entry_id))

    def dump(self) -> str:
        """JSON-lines dump of the current contents, by entry id."""
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self)


def put(store: ContentStore, entry: StoreEntry) -> list[int]:
    return store.put(entry)


def get(store: ContentStore, entry_id: int, now: Optional[float] = None) -> bytes:
    return store.get(entry_id, now)


def pending_for(store: ContentStore, peer: int, sync: SyncState) -> list[StoreEntry]:
    return store.pending_for(peer, sync)
