"""Index-routed hierarchical retrieval and the flat-scan baseline.

Both paths count every query/vector dot product they perform, so the
counts reported in :class:`RetrievalResult` are exact, not estimates.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError, DimensionError
from .store import MemoryStore, NodeId
from .validation import check_vector


@dataclass(frozen=True)
class Hit:
    episode: NodeId
    similarity: float
    weight: float
    path: tuple[NodeId, ...]
    score: float

    def to_dict(self) -> dict:
        return {
            "episode": str(self.episode),
            "similarity": self.similarity,
            "weight": self.weight,
            "score": self.score,
            "path": [str(p) for p in self.path],
        }


@dataclass
class RetrievalResult:
    hits: list[Hit] = field(default_factory=list)
    sim_ops: int = 0
    elapsed: float = 0.0
    # candidates scored per level, top-down
    level_ops: list[int] = field(default_factory=list)

    def episode_ids(self) -> list[NodeId]:
        return [h.episode for h in self.hits]

    def to_dict(self) -> dict:
        return {
            "hits": [h.to_dict() for h in self.hits],
            "sim_ops": self.sim_ops,
            "level_ops": list(self.level_ops),
            "elapsed_ms": self.elapsed * 1e3,
        }


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"cosine of vectors with shapes {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DegenerateInputError("cosine is undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


def _top(scores: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k best scores, best first.

    Callers pass scores aligned with ascending row ids, so a stable sort
    breaks ties toward the lowest row.
    """
    m = scores.shape[0]
    if k >= m:
        return np.argsort(-scores, kind="stable")
    cut = np.partition(scores, m - k)[m - k]
    pool = np.flatnonzero(scores >= cut)
    order = np.argsort(-scores[pool], kind="stable")
    return pool[order[:k]]


def _episode_scores(store: MemoryStore, sims: np.ndarray, rows: np.ndarray) -> np.ndarray:
    gamma = store.config.blend_gamma
    if gamma is None:
        return sims
    return sims * np.power(store.episode_layer.weight[rows], gamma)


def _hits(store: MemoryStore, rows, sims, scores) -> list[Hit]:
    ep = store.episode_layer
    L = store.levels
    return [
        Hit(
            episode=NodeId(L, int(r)),
            similarity=float(s),
            weight=float(ep.weight[r]),
            path=store.path(int(r)),
            score=float(sc),
        )
        for r, s, sc in zip(rows, sims, scores)
    ]


def _children_of(layer, rows: np.ndarray) -> np.ndarray:
    lists = [layer.children[r] for r in rows]
    total = sum(len(c) for c in lists)
    if not total:
        return np.zeros(0, dtype=np.int64)
    flat = np.fromiter((c for lst in lists for c in lst), dtype=np.int64, count=total)
    # dedupe so a shared child would be scored once; also sorts by row
    return np.unique(flat)


def retrieve(store: MemoryStore, query, k: int | None = None, n: int | None = None,
             *, now: float | None = None, touch: bool = True) -> RetrievalResult:
    """Top-down routed search.

    Level 1 scores every live domain; each lower level scores only the
    children of the previous level's ``k`` survivors, and the episode level
    keeps the best ``n``. Returned episodes get their access recorded.
    """
    cfg = store.config
    k = cfg.k_per_level if k is None else int(k)
    n = cfg.final_n if n is None else int(n)
    if k < 1 or n < 1:
        raise ValueError("k and n must be positive")
    q = check_vector(query, store.dim, name="query")
    t0 = time.perf_counter()
    level_ops: list[int] = []
    hits: list[Hit] = []
    with store.reading():
        rows = store._layers[0].live_rows()
        for depth in range(store.levels):
            if rows.size == 0:
                break
            layer = store._layers[depth]
            sims = layer.vectors[rows] @ q
            level_ops.append(int(rows.size))
            if depth == store.levels - 1:
                scores = _episode_scores(store, sims, rows)
                best = _top(scores, n)
                hits = _hits(store, rows[best], sims[best], scores[best])
                break
            rows = _children_of(layer, rows[_top(sims, k)])
    elapsed = time.perf_counter() - t0
    if touch and hits:
        stamp = time.time() if now is None else float(now)
        with store.writing():
            ep = store.episode_layer
            for h in hits:
                r = h.episode.row
                if ep.live[r]:
                    ep.last_access[r] = max(ep.last_access[r], stamp)
                    ep.access_count[r] += 1
    sim_ops = sum(level_ops)
    store._record_retrieval(sim_ops, elapsed)
    return RetrievalResult(hits=hits, sim_ops=sim_ops, elapsed=elapsed, level_ops=level_ops)


def flat_retrieve(store: MemoryStore, query, n: int | None = None) -> RetrievalResult:
    """Score every live episode once and keep the best ``n``. Read-only."""
    n = store.config.final_n if n is None else int(n)
    if n < 1:
        raise ValueError("n must be positive")
    q = check_vector(query, store.dim, name="query")
    t0 = time.perf_counter()
    with store.reading():
        ep = store.episode_layer
        if ep.dead == 0:
            rows = np.arange(ep.size)
            sims = ep.vectors[: ep.size] @ q
        else:
            rows = ep.live_rows()
            sims = ep.vectors[rows] @ q
        hits = []
        if rows.size:
            scores = _episode_scores(store, sims, rows)
            best = _top(scores, n)
            hits = _hits(store, rows[best], sims[best], scores[best])
    elapsed = time.perf_counter() - t0
    sim_ops = int(rows.size)
    store._record_retrieval(sim_ops, elapsed)
    return RetrievalResult(hits=hits, sim_ops=sim_ops, elapsed=elapsed, level_ops=[sim_ops])


def reset_counters(store: MemoryStore) -> dict:
    """Zero the store's accumulated counters and return what they held."""
    return store._swap_counters()
