"""Rooted concept taxonomy with depth, common-ancestor, distance and similarity queries.

Concepts are identified by dense integer ids handed out in insertion order, so
a taxonomy built the same way always serializes to the same document.  Depth
is 1-based: the root has depth 1.  Similarity between two concepts is the
Wu-Palmer ratio ``2 * depth(lca) / (depth(a) + depth(b))``.

The text format is one node per line::

    <id>\\t<parent-id or ->\\t<label>

with the root on the first line.
"""

from __future__ import annotations

from importlib import resources
from typing import Iterator, Optional

from .errors import (
    CycleOrOrphan,
    DuplicateSiblingLabel,
    ParseError,
    UnknownConcept,
    UnknownParent,
)

ConceptId = int

PATH_SEP = "/"


class Taxonomy:
    """A strict tree of labelled concepts."""

    def __init__(self, root_label: str):
        if not root_label:
            raise ValueError("root label must be non-empty")
        self._labels: list[str] = [root_label]
        self._parents: list[Optional[ConceptId]] = [None]
        self._depths: list[int] = [1]
        self._children: list[list[ConceptId]] = [[]]

    @property
    def root(self) -> ConceptId:
        return 0

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, c: object) -> bool:
        return isinstance(c, int) and 0 <= c < len(self._labels)

    def __iter__(self) -> Iterator[ConceptId]:
        return iter(range(len(self._labels)))

    def _check(self, c: ConceptId) -> None:
        if c not in self:
            raise UnknownConcept(f"unknown concept id {c!r}")

    def add_concept(self, parent: ConceptId, label: str) -> ConceptId:
        if parent not in self:
            raise UnknownParent(f"unknown parent id {parent!r}")
        if not label or PATH_SEP in label or "\t" in label or "\n" in label:
            raise ValueError(f"invalid concept label {label!r}")
        if any(self._labels[k] == label for k in self._children[parent]):
            raise DuplicateSiblingLabel(
                f"{label!r} already exists under {self.path(parent) or self._labels[parent]!r}"
            )
        cid = len(self._labels)
        self._labels.append(label)
        self._parents.append(parent)
        self._depths.append(self._depths[parent] + 1)
        self._children.append([])
        self._children[parent].append(cid)
        return cid

    def label(self, c: ConceptId) -> str:
        self._check(c)
        return self._labels[c]

    def parent(self, c: ConceptId) -> Optional[ConceptId]:
        self._check(c)
        return self._parents[c]

    def children(self, c: ConceptId) -> tuple[ConceptId, ...]:
        self._check(c)
        return tuple(self._children[c])

    def child(self, c: ConceptId, label: str) -> Optional[ConceptId]:
        for k in self.children(c):
            if self._labels[k] == label:
                return k
        return None

    def depth(self, c: ConceptId) -> int:
        self._check(c)
        return self._depths[c]

    def ancestors(self, c: ConceptId) -> list[ConceptId]:
        """Ancestor-or-self chain from ``c`` up to the root."""
        self._check(c)
        chain = []
        node: Optional[ConceptId] = c
        while node is not None:
            chain.append(node)
            node = self._parents[node]
        return chain

    def lca(self, a: ConceptId, b: ConceptId) -> ConceptId:
        self._check(a)
        self._check(b)
        da, db = self._depths[a], self._depths[b]
        while da > db:
            a = self._parents[a]  # type: ignore[assignment]
            da -= 1
        while db > da:
            b = self._parents[b]  # type: ignore[assignment]
            db -= 1
        while a != b:
            a = self._parents[a]  # type: ignore[assignment]
            b = self._parents[b]  # type: ignore[assignment]
        return a

    def concept_distance(self, a: ConceptId, b: ConceptId) -> int:
        """Number of edges on the tree path between ``a`` and ``b``."""
        m = self.lca(a, b)
        return self._depths[a] + self._depths[b] - 2 * self._depths[m]

    def concept_similarity(self, a: ConceptId, b: ConceptId) -> float:
        m = self.lca(a, b)
        if a == b:
            return 1.0
        return 2.0 * self._depths[m] / (self._depths[a] + self._depths[b])

    def path(self, c: ConceptId) -> str:
        """Slash-joined labels below the root, e.g. ``Music/Jazz``; the root maps to ``""``."""
        chain = self.ancestors(c)[:-1]
        return PATH_SEP.join(self._labels[k] for k in reversed(chain))

    def resolve(self, path: str) -> ConceptId:
        """Inverse of :meth:`path`.  A leading root label is tolerated."""
        parts = [p for p in path.strip().split(PATH_SEP) if p]
        if parts and parts[0] == self._labels[0] and self.child(0, parts[0]) is None:
            parts = parts[1:]
        node = self.root
        for part in parts:
            nxt = self.child(node, part)
            if nxt is None:
                raise UnknownConcept(f"unresolved concept path {path!r}")
            node = nxt
        return node

    def dumps(self) -> str:
        lines = []
        for c in self:
            parent = self._parents[c]
            lines.append(f"{c}\t{'-' if parent is None else parent}\t{self._labels[c]}")
        return "\n".join(lines) + "\n"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Taxonomy):
            return NotImplemented
        return self._labels == other._labels and self._parents == other._parents

    def __repr__(self) -> str:
        return f"Taxonomy(root={self._labels[0]!r}, nodes={len(self)})"


def depth(t: Taxonomy, c: ConceptId) -> int:
    return t.depth(c)


def lca(t: Taxonomy, a: ConceptId, b: ConceptId) -> ConceptId:
    return t.lca(a, b)


def concept_distance(t: Taxonomy, a: ConceptId, b: ConceptId) -> int:
    return t.concept_distance(a, b)


def concept_similarity(t: Taxonomy, a: ConceptId, b: ConceptId) -> float:
    return t.concept_similarity(a, b)


def add_concept(t: Taxonomy, parent: ConceptId, label: str) -> ConceptId:
    return t.add_concept(parent, label)


def load_taxonomy(text: str) -> Taxonomy:
    """Parse a taxonomy document.

    Node ids in the file may be any distinct non-negative integers and parents
    may be declared after their children; concepts receive dense ids in line
    order.  Raises :class:`ParseError` for malformed lines and
    :class:`CycleOrOrphan` when some node cannot be reached from the root.
    """
    rows: list[tuple[int, int, Optional[int], str]] = []
    seen: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        fields = raw.split("\t")
        if len(fields) != 3:
            raise ParseError(lineno, "expected <id> TAB <parent> TAB <label>")
        sid, sparent, label = fields
        try:
            fid = int(sid)
        except ValueError:
            raise ParseError(lineno, f"bad id {sid!r}") from None
        if fid < 0:
            raise ParseError(lineno, f"bad id {sid!r}")
        if fid in seen:
            raise ParseError(lineno, f"duplicate id {fid}")
        if sparent == "-":
            if rows:
                raise ParseError(lineno, "only the first line may be the root")
            fparent = None
        else:
            if not rows:
                raise ParseError(lineno, "first line must be the root (parent '-')")
            try:
                fparent = int(sparent)
            except ValueError:
                raise ParseError(lineno, f"bad parent id {sparent!r}") from None
        if not label:
            raise ParseError(lineno, "empty label")
        seen[fid] = len(rows)
        rows.append((lineno, fid, fparent, label))
    if not rows:
        raise ParseError(1, "empty document: a root line is required")

    for lineno, fid, fparent, _ in rows[1:]:
        if fparent not in seen:
            raise CycleOrOrphan(f"line {lineno}: node {fid} references undefined parent {fparent}")

    # Attach in line order; a node whose parent is not yet attached waits.
    t = Taxonomy(rows[0][3])
    dense: dict[int, int] = {rows[0][1]: t.root}
    pending = rows[1:]
    while pending:
        waiting = []
        for row in pending:
            lineno, fid, fparent, label = row
            if fparent in dense:
                try:
                    dense[fid] = t.add_concept(dense[fparent], label)
                except (DuplicateSiblingLabel, ValueError) as exc:
                    raise ParseError(lineno, str(exc)) from None
            else:
                waiting.append(row)
        if len(waiting) == len(pending):
            ids = ", ".join(str(r[1]) for r in waiting)
            raise CycleOrOrphan(f"nodes not reachable from the root: {ids}")
        pending = waiting
    return t


def dump_taxonomy(t: Taxonomy) -> str:
    return t.dumps()


def sample_taxonomy() -> Taxonomy:
    """The bundled campus taxonomy (interests, locations and activities)."""
    text = resources.files("mym").joinpath("data/campus.tax").read_text(encoding="utf-8")
    return load_taxonomy(text)
