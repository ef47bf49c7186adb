"""Hybrid offline/online social networking: taxonomy-based profile matching,
a social graph, and a protocol engine driven by a deterministic ad-hoc
network simulator."""

from .contentstore import ContentStore, StoreEntry, SyncState
from .errors import MymError
from .matchmaking import (
    DynamicContext,
    Gender,
    Match,
    MatchParams,
    MotionState,
    Profile,
    RelevanceScore,
    is_match,
    profile_similarity,
    proximity_factor,
    rank_candidates,
    relevance,
)
from .netsim import ScenarioConfig, Simulator, load_scenario, metrics, run
from .ontology import Taxonomy, load_taxonomy, sample_taxonomy
from .protocol import BROADCAST, Frame, FrameKind, NodeEngine, ProtocolParams, decode_frame, encode_frame
from .socialgraph import Role, SocialGraph, replay

__version__ = "0.1.0"
