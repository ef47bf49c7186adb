"""Profiles, profile similarity, proximity-attenuated relevance and candidate ranking."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

from .errors import DomainError, UnknownConcept
from .ontology import ConceptId, Taxonomy


class Gender(str, enum.Enum):
    FEMALE = "female"
    MALE = "male"
    UNSPECIFIED = "unspecified"


class MotionState(str, enum.Enum):
    STILL = "still"
    WALKING = "walking"
    VEHICLE = "vehicle"


class Match(enum.IntEnum):
    """Match classification; the integer order is the strength order."""

    NO_MATCH = 0
    MATCH = 1
    EXACT_MATCH = 2

    def __str__(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class DynamicContext:
    activity: Optional[str] = None
    orientation: Optional[float] = None
    motion_state: Optional[MotionState] = None
    terminal: Optional[str] = None
    location: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.orientation is not None and not 0.0 <= self.orientation < 360.0:
            raise DomainError(f"orientation must lie in [0, 360), got {self.orientation}")
        if self.motion_state is not None and not isinstance(self.motion_state, MotionState):
            object.__setattr__(self, "motion_state", MotionState(self.motion_state))
        if self.location is not None:
            x, y = self.location
            object.__setattr__(self, "location", (float(x), float(y)))


@dataclass(frozen=True)
class Profile:
    person_id: str
    name: str
    age: int = 0
    gender: Gender = Gender.UNSPECIFIED
    interests: frozenset[ConceptId] = frozenset()
    context: DynamicContext = field(default_factory=DynamicContext)

    def __post_init__(self):
        if not self.name:
            raise DomainError("profile name must be non-empty")
        if self.age < 0:
            raise DomainError(f"age must be non-negative, got {self.age}")
        if not isinstance(self.gender, Gender):
            object.__setattr__(self, "gender", Gender(self.gender))
        if not isinstance(self.interests, frozenset):
            object.__setattr__(self, "interests", frozenset(self.interests))

    def validate(self, t: Taxonomy) -> None:
        for c in self.interests:
            if c not in t:
                raise UnknownConcept(f"interest {c!r} of {self.person_id!r} is not in the taxonomy")


@dataclass(frozen=True)
class MatchParams:
    match_threshold: float = 0.75
    near_radius: float = 10.0
    decay_length: float = 100.0
    exact_match_floor: float = 0.9999

    def __post_init__(self):
        if not 0.0 < self.match_threshold <= 1.0:
            raise DomainError("match_threshold must lie in (0, 1]")
        if self.match_threshold > self.exact_match_floor:
            raise DomainError("match_threshold may not exceed exact_match_floor")
        if self.near_radius <= 0 or self.decay_length <= 0:
            raise DomainError("near_radius and decay_length must be positive")


@dataclass(frozen=True)
class RelevanceScore:
    value: float
    profile_similarity: float
    proximity_factor: float
    observer_distance: float

    def to_dict(self) -> dict[str, float]:
        return {
            "value": self.value,
            "profile_similarity": self.profile_similarity,
            "proximity_factor": self.proximity_factor,
            "observer_distance": self.observer_distance,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RelevanceScore":
        return cls(
            float(d["value"]),
            float(d["profile_similarity"]),
            float(d["proximity_factor"]),
            float(d["observer_distance"]),
        )


DEFAULT_PARAMS = MatchParams()


def _best_match_terms(src: Iterable[ConceptId], dst: frozenset[ConceptId], t: Taxonomy) -> list[float]:
    return [max(t.concept_similarity(a, b) for b in dst) for a in src]


def profile_similarity(p: Profile, q: Profile, t: Taxonomy) -> float:
    """Symmetric best-match average of concept similarities over two interest sets.

    Every interest on either side contributes the similarity of its best
    counterpart on the other side; the total is divided by ``|A| + |B|``.
    An empty set on either side scores 0.
    """
    p.validate(t)
    q.validate(t)
    a, b = p.interests, q.interests
    if not a or not b:
        return 0.0
    terms = _best_match_terms(sorted(a), b, t) + _best_match_terms(sorted(b), a, t)
    # fsum is order-independent, which keeps the score exactly symmetric.
    return math.fsum(terms) / (len(a) + len(b))


def proximity_factor(d: float, params: MatchParams = DEFAULT_PARAMS) -> float:
    if d < 0 or math.isnan(d):
        raise DomainError(f"distance must be non-negative, got {d}")
    if d <= params.near_radius:
        return 1.0
    return math.exp(-(d - params.near_radius) / params.decay_length)


def relevance(
    monitor: Profile,
    reference: Profile,
    d: float,
    t: Taxonomy,
    params: MatchParams = DEFAULT_PARAMS,
) -> RelevanceScore:
    factor = proximity_factor(d, params)
    sim = profile_similarity(monitor, reference, t)
    return RelevanceScore(sim * factor, sim, factor, float(d))


def is_match(s: RelevanceScore, params: MatchParams = DEFAULT_PARAMS) -> Match:
    if s.value >= params.exact_match_floor:
        return Match.EXACT_MATCH
    if s.value >= params.match_threshold:
        return Match.MATCH
    return Match.NO_MATCH


def rank_scores(scores: Iterable[tuple[str, RelevanceScore]]) -> list[tuple[str, RelevanceScore]]:
    """Order by relevance descending, ties by ascending person id."""
    return sorted(scores, key=lambda item: (-item[1].value, item[0]))


def rank_candidates(
    monitor: Profile,
    candidates: Sequence[tuple[Profile, float]],
    t: Taxonomy,
    params: MatchParams = DEFAULT_PARAMS,
) -> list[tuple[str, RelevanceScore]]:
    scored = [
        (cand.person_id, relevance(monitor, cand, d, t, params))
        for cand, d in candidates
        if cand.person_id != monitor.person_id
    ]
    return rank_scores(scored)


def planar_distance(a: Optional[tuple[float, float]], b: Optional[tuple[float, float]]) -> float:
    """Euclidean distance in meters; an unknown location counts as co-located."""
    if a is None or b is None:
        return 0.0
    return math.hypot(a[0] - b[0], a[1] - b[1])


# --- documents -------------------------------------------------------------


def context_to_dict(ctx: DynamicContext) -> dict[str, Any]:
    return {
        "activity": ctx.activity,
        "orientation": ctx.orientation,
        "motion_state": ctx.motion_state.value if ctx.motion_state else None,
        "terminal": ctx.terminal,
        "location": list(ctx.location) if ctx.location is not None else None,
    }


def context_from_dict(d: Optional[dict[str, Any]]) -> DynamicContext:
    d = d or {}
    loc = d.get("location")
    return DynamicContext(
        activity=d.get("activity"),
        orientation=d.get("orientation"),
        motion_state=d.get("motion_state"),
        terminal=d.get("terminal"),
        location=tuple(loc) if loc is not None else None,
    )


def profile_to_dict(p: Profile, t: Optional[Taxonomy] = None) -> dict[str, Any]:
    """Serialize a profile.  With a taxonomy, interests become label paths; otherwise ids."""
    interests: list[Any]
    if t is not None:
        interests = sorted(t.path(c) for c in p.interests)
    else:
        interests = sorted(p.interests)
    return {
        "person_id": p.person_id,
        "name": p.name,
        "age": p.age,
        "gender": p.gender.value,
        "interests": interests,
        "context": context_to_dict(p.context),
    }


def profile_from_dict(d: dict[str, Any], t: Optional[Taxonomy] = None) -> Profile:
    """Inverse of :func:`profile_to_dict`.

    String interests are resolved as label paths against ``t``; integer
    interests are taken as concept ids.  ``person_id`` defaults to ``name``.
    """
    if "name" not in d:
        raise DomainError("profile document lacks 'name'")
    interests = set()
    for item in d.get("interests", []):
        if isinstance(item, str):
            if t is None:
                raise DomainError("label-path interests need a taxonomy")
            interests.add(t.resolve(item))
        else:
            interests.add(int(item))
    p = Profile(
        person_id=str(d.get("person_id") or d["name"]),
        name=d["name"],
        age=int(d.get("age", 0)),
        gender=Gender(d.get("gender", "unspecified")),
        interests=frozenset(interests),
        context=context_from_dict(d.get("context")),
    )
    if t is not None:
        p.validate(t)
    return p


def load_profile(path: str, t: Taxonomy) -> Profile:
    with open(path, encoding="utf-8") as fh:
        return profile_from_dict(json.load(fh), t)
