from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from hiermem.config import HierarchyConfig
from hiermem.records import ExtractionRecord
from hiermem.store import MemoryStore, insert

DATA = Path(__file__).parent / "data"
CORPUS = DATA / "corpus.json"


def basis(dim: int, i: int) -> np.ndarray:
    v = np.zeros(dim)
    v[i] = 1.0
    return v


def record(domain="d", category="c", trace="t", text="episode", ts=1.0, profile="") -> ExtractionRecord:
    return ExtractionRecord(domain=domain, category=category, trace=trace, episode_text=text,
                            profile=profile, timestamp=ts)


def insert_basis(store: MemoryStore, idx, text="episode", ts=1.0):
    """Insert with level vectors chosen as basis vectors ``idx`` (one per level)."""
    vecs = np.array([basis(store.dim, i) for i in idx])
    return insert(store, record(*(f"n{i}" for i in idx[:3]), text=text, ts=ts), vecs)


def live_view(store: MemoryStore):
    """Everything observable about live nodes, keyed by dense live position."""
    out = []
    for layer in store._layers:
        rows = layer.live_rows()
        rank = {int(r): i for i, r in enumerate(rows)}
        entry = {
            "vectors": layer.vectors[rows].astype("<f4").tobytes(),
            "labels": [layer.labels[r] for r in rows],
        }
        if layer.episodes:
            for col in ("weight", "strength", "last_access", "decay_anchor", "access_count", "timestamps"):
                entry[col] = getattr(layer, col)[rows].tolist()
            entry["texts"] = [layer.texts[r] for r in rows]
            entry["profiles"] = [layer.profiles[r] for r in rows]
        else:
            entry["sums"] = layer.sums[rows].tobytes()
            entry["counts"] = layer.counts[rows].tolist()
        out.append((entry, rank))
    edges = []
    for depth in range(1, store.levels):
        child_rank = out[depth][1]
        parent_rank = out[depth - 1][1]
        layer = store._layers[depth]
        edges.append(sorted((parent_rank[int(layer.parents[r])], child_rank[int(r)]) for r in layer.live_rows()))
    return [e for e, _ in out], edges


@pytest.fixture
def small_store() -> MemoryStore:
    return MemoryStore(HierarchyConfig(dim=8))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
