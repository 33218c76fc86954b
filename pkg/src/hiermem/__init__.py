"""Hierarchical semantic memory for long-lived agents.

A four-layer store (domain, category, trace, episode) with index-routed
top-k retrieval, a flat-scan baseline, forgetting-curve decay and
feedback-driven weights.
"""
from __future__ import annotations

from .config import HierarchyConfig
from .dynamics import Feedback, FeedbackKind, apply_feedback, decay, touch
from .encoder import HashEmbedder, RemoteEmbedder, fnv1a_64, hash_embed
from .exceptions import (
    ChecksumError,
    ConfigError,
    DimensionError,
    ExtractionError,
    HMemError,
    IntegrityError,
    NotFoundError,
    SnapshotError,
    TransportError,
    UnsupportedOperationError,
    ValidationError,
    VersionMismatchError,
)
from .ingest import LLMExtractor, extract_stub, ingest_turn, load_corpus
from .persistence import load, save
from .records import DialogueTurn, ExtractionRecord
from .retrieval import Hit, RetrievalResult, cosine, flat_retrieve, reset_counters, retrieve
from .store import (
    Episode,
    MemoryNode,
    MemoryStore,
    NodeId,
    RetentionState,
    adjust_depth,
    compact,
    create_store,
    get_node,
    insert,
    verify_integrity,
)

__version__ = "0.1.0"

__all__ = [
    "ChecksumError", "ConfigError", "DialogueTurn", "DimensionError", "Episode", "ExtractionError",
    "ExtractionRecord", "Feedback", "FeedbackKind", "HMemError", "HashEmbedder", "HierarchyConfig", "Hit",
    "IntegrityError", "LLMExtractor", "MemoryNode", "MemoryStore", "NodeId", "NotFoundError",
    "RemoteEmbedder", "RetentionState", "RetrievalResult", "SnapshotError", "TransportError",
    "UnsupportedOperationError", "ValidationError", "VersionMismatchError", "adjust_depth",
    "apply_feedback", "compact", "cosine", "create_store", "decay", "extract_stub", "flat_retrieve",
    "fnv1a_64", "get_node", "hash_embed", "ingest_turn", "insert", "load", "load_corpus",
    "reset_counters", "retrieve", "save", "touch", "verify_integrity",
]
