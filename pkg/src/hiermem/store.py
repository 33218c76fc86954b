"""Hierarchical memory store.

Nodes live in per-layer columnar tables. Row numbers are never reused, so
``NodeId(layer, row)`` stays valid for a node's lifetime; deletion only sets
a tombstone. Layer 1 holds domains, the last layer holds episodes.

Vectors are float32-representable values kept in float64 arrays (see
:func:`hiermem.validation.as_float32_exact`).
"""
from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .config import MAX_LEVELS, MIN_LEVELS, HierarchyConfig
from .exceptions import (
    ConfigError,
    DimensionError,
    NotFoundError,
    UnsupportedOperationError,
    ValidationError,
)
from .records import ExtractionRecord
from .validation import UNIT_TOL, as_float32_exact, check_unit_rows


@dataclass(frozen=True, order=True)
class NodeId:
    layer: int
    row: int

    def __str__(self) -> str:
        return f"{self.layer}:{self.row}"

    @classmethod
    def parse(cls, text: str) -> NodeId:
        try:
            layer, row = str(text).split(":")
            node = cls(int(layer), int(row))
        except ValueError:
            raise ValidationError(f"malformed node id {text!r}, expected '<layer>:<row>'") from None
        if node.layer < 1 or node.row < 0:
            raise ValidationError(f"malformed node id {text!r}")
        return node


@dataclass
class RetentionState:
    weight: float
    strength: float
    last_access: float
    access_count: int = 0
    # weight already reflects decay up to this instant
    decay_anchor: float = 0.0


@dataclass
class MemoryNode:
    id: NodeId
    vector: np.ndarray
    label: str
    children: list[NodeId] = field(default_factory=list)
    parent: NodeId | None = None
    retention: RetentionState | None = None
    tombstone: bool = False
    count: int = 1


@dataclass
class Episode:
    node: MemoryNode
    text: str
    timestamp: float
    profile: str

    @property
    def id(self) -> NodeId:
        return self.node.id


@dataclass(frozen=True)
class Violation:
    kind: str
    node: NodeId | None
    detail: str

    def __str__(self) -> str:
        where = f" at {self.node}" if self.node is not None else ""
        return f"{self.kind}{where}: {self.detail}"


class RWLock:
    """Many readers or one writer. Not reentrant."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


_RETENTION_COLS = ("weight", "strength", "last_access", "decay_anchor")


class _Layer:
    """Columnar storage for one hierarchy level."""

    def __init__(self, dim: int, episodes: bool, capacity: int = 16):
        self.dim = dim
        self.episodes = episodes
        self.size = 0
        self.dead = 0
        self.labels: list[str] = []
        self.vectors = np.zeros((capacity, dim))
        self.parents = np.full(capacity, -1, dtype=np.int64)
        self.live = np.zeros(capacity, dtype=bool)
        if episodes:
            self.children = None
            self.texts: list[str] = []
            self.profiles: list[str] = []
            self.timestamps = np.zeros(capacity)
            for name in _RETENTION_COLS:
                setattr(self, name, np.zeros(capacity))
            self.access_count = np.zeros(capacity, dtype=np.int64)
        else:
            self.children: list[list[int]] = []
            self.sums = np.zeros((capacity, dim))
            self.counts = np.zeros(capacity, dtype=np.int64)

    def _array_names(self):
        names = ["vectors", "parents", "live"]
        if self.episodes:
            names += ["timestamps", *_RETENTION_COLS, "access_count"]
        else:
            names += ["sums", "counts"]
        return names

    def reserve(self, n: int):
        cap = self.vectors.shape[0]
        if n <= cap:
            return
        new_cap = max(n, 2 * cap)
        for name in self._array_names():
            old = getattr(self, name)
            shape = (new_cap,) + old.shape[1:]
            fill = -1 if name == "parents" else 0
            arr = np.full(shape, fill, dtype=old.dtype)
            arr[: self.size] = old[: self.size]
            setattr(self, name, arr)

    @property
    def n_live(self) -> int:
        return self.size - self.dead

    def live_rows(self) -> np.ndarray:
        return np.flatnonzero(self.live[: self.size])

    def append(self, vector: np.ndarray, label: str, parent: int) -> int:
        row = self.size
        self.reserve(row + 1)
        self.vectors[row] = vector
        self.parents[row] = parent
        self.live[row] = True
        self.labels.append(label)
        if not self.episodes:
            self.children.append([])
            self.sums[row] = vector
            self.counts[row] = 1
        self.size += 1
        return row


class MemoryStore:
    """In-memory hierarchical store; see module docstring.

    Writers (insert, feedback, decay, compact) take ``writing()``; retrieval
    takes ``reading()`` for scoring and only briefly writes to record access.
    """

    def __init__(self, config: HierarchyConfig | None = None):
        self.config = config if config is not None else HierarchyConfig()
        self.meta: dict = {}
        self._lock = RWLock()
        self._counter_lock = threading.Lock()
        self._sim_ops = 0
        self._elapsed = 0.0
        self._retrievals = 0
        self._reset_layers()

    def _reset_layers(self):
        L, D = self.config.levels, self.config.dim
        self._layers = [_Layer(D, episodes=(i == L - 1)) for i in range(L)]

    # -- locking ---------------------------------------------------------
    def reading(self):
        return self._lock.read()

    def writing(self):
        return self._lock.write()

    # -- shape -----------------------------------------------------------
    @property
    def levels(self) -> int:
        return self.config.levels

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def episode_layer(self) -> _Layer:
        return self._layers[-1]

    def node_counts(self) -> list[int]:
        """Live nodes per layer, top-down."""
        return [layer.n_live for layer in self._layers]

    def __len__(self) -> int:
        return self.episode_layer.n_live

    def is_empty(self) -> bool:
        return not any(self.node_counts())

    def episode_ids(self) -> list[NodeId]:
        return [NodeId(self.levels, int(r)) for r in self.episode_layer.live_rows()]

    # -- lookups ---------------------------------------------------------
    def _locate(self, node_id: NodeId) -> tuple[_Layer, int]:
        if not isinstance(node_id, NodeId):
            node_id = NodeId.parse(node_id)
        if not 1 <= node_id.layer <= self.levels:
            raise NotFoundError(f"node {node_id} not found (no layer {node_id.layer})")
        layer = self._layers[node_id.layer - 1]
        if not 0 <= node_id.row < layer.size or not layer.live[node_id.row]:
            raise NotFoundError(f"node {node_id} not found")
        return layer, node_id.row

    def _locate_episode(self, node_id: NodeId) -> int:
        if not isinstance(node_id, NodeId):
            node_id = NodeId.parse(node_id)
        if node_id.layer != self.levels:
            raise NotFoundError(f"node {node_id} is not an episode (episode layer is {self.levels})")
        return self._locate(node_id)[1]

    def get_node(self, node_id: NodeId) -> MemoryNode:
        if not isinstance(node_id, NodeId):
            node_id = NodeId.parse(node_id)
        layer, row = self._locate(node_id)
        depth = node_id.layer - 1
        parent = int(layer.parents[row])
        node = MemoryNode(
            id=NodeId(depth + 1, row),
            vector=layer.vectors[row].copy(),
            label=layer.labels[row],
            parent=NodeId(depth, parent) if parent >= 0 else None,
        )
        if layer.episodes:
            node.retention = self.retention(node.id)
        else:
            node.children = [NodeId(depth + 2, c) for c in layer.children[row]]
            node.count = int(layer.counts[row])
        return node

    def get_episode(self, node_id: NodeId) -> Episode:
        row = self._locate_episode(node_id)
        ep = self.episode_layer
        return Episode(
            node=self.get_node(NodeId(self.levels, row)),
            text=ep.texts[row],
            timestamp=float(ep.timestamps[row]),
            profile=ep.profiles[row],
        )

    def retention(self, node_id: NodeId) -> RetentionState:
        row = self._locate_episode(node_id)
        ep = self.episode_layer
        return RetentionState(
            weight=float(ep.weight[row]),
            strength=float(ep.strength[row]),
            last_access=float(ep.last_access[row]),
            access_count=int(ep.access_count[row]),
            decay_anchor=float(ep.decay_anchor[row]),
        )

    def set_retention(self, node_id: NodeId, *, weight=None, strength=None,
                      last_access=None, decay_anchor=None, access_count=None) -> RetentionState:
        """Overwrite retention fields of one episode, enforcing bounds."""
        cfg = self.config
        with self.writing():
            row = self._locate_episode(node_id)
            ep = self.episode_layer
            if weight is not None:
                if not cfg.min_weight <= weight <= cfg.max_weight:
                    raise ValidationError(f"weight {weight} outside [{cfg.min_weight}, {cfg.max_weight}]")
                ep.weight[row] = weight
            if strength is not None:
                if not strength >= cfg.min_strength:
                    raise ValidationError(f"strength {strength} below minimum {cfg.min_strength}")
                ep.strength[row] = strength
            if last_access is not None:
                ep.last_access[row] = last_access
            if decay_anchor is not None:
                ep.decay_anchor[row] = decay_anchor
            if access_count is not None:
                ep.access_count[row] = int(access_count)
        return self.retention(node_id)

    def path(self, episode_row: int) -> tuple[NodeId, ...]:
        """Root-to-episode chain of node ids."""
        out = []
        row = int(episode_row)
        for depth in range(self.levels - 1, -1, -1):
            out.append(NodeId(depth + 1, row))
            row = int(self._layers[depth].parents[row])
        return tuple(reversed(out))

    def path_labels(self, path) -> list[str]:
        return [self._layers[n.layer - 1].labels[n.row] for n in path]

    # -- counters --------------------------------------------------------
    def _record_retrieval(self, sim_ops: int, elapsed: float):
        with self._counter_lock:
            self._sim_ops += sim_ops
            self._elapsed += elapsed
            self._retrievals += 1

    def counters(self) -> dict:
        with self._counter_lock:
            return {"sim_ops": self._sim_ops, "elapsed": self._elapsed, "retrievals": self._retrievals}

    def _swap_counters(self) -> dict:
        with self._counter_lock:
            prev = {"sim_ops": self._sim_ops, "elapsed": self._elapsed, "retrievals": self._retrievals}
            self._sim_ops, self._elapsed, self._retrievals = 0, 0.0, 0
        return prev


def create_store(config: HierarchyConfig | None = None) -> MemoryStore:
    return MemoryStore(config)


def get_node(store: MemoryStore, node_id: NodeId) -> MemoryNode:
    return store.get_node(node_id)


def _check_level_vectors(store: MemoryStore, vectors) -> np.ndarray:
    L, D = store.levels, store.dim
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != L:
        raise ValidationError(f"expected {L} level vectors, got array of shape {arr.shape}")
    if arr.shape[1] != D:
        raise DimensionError(f"level vectors have dimension {arr.shape[1]}, store expects {D}")
    return as_float32_exact(check_unit_rows(arr, D, name="level vector"))


def insert(store: MemoryStore, record: ExtractionRecord, vectors) -> NodeId:
    """Add one interaction; returns the new episode's id.

    Interior levels reuse the most similar live sibling under the chosen
    parent when its cosine similarity reaches ``merge_threshold`` (ties go to
    the lowest row), else a new node is appended. Episodes never merge.
    All checks run before any mutation.
    """
    cfg = store.config
    L = cfg.levels
    record.validate()
    labels = record.path_labels(L)
    vecs = _check_level_vectors(store, vectors)

    with store.writing():
        # decide merges before touching anything
        plan: list[int | None] = []
        parent = -1
        for depth in range(L - 1):
            layer = store._layers[depth]
            if parent is None:
                plan.append(None)
                continue
            siblings = layer.live_rows() if depth == 0 else np.asarray(
                store._layers[depth - 1].children[parent], dtype=np.int64)
            match = None
            if siblings.size:
                siblings = np.sort(siblings)
                sims = layer.vectors[siblings] @ vecs[depth]
                best = int(np.argmax(sims))  # first max = lowest row
                if sims[best] >= cfg.merge_threshold:
                    match = int(siblings[best])
            plan.append(match)
            parent = match

        parent = -1
        for depth, match in enumerate(plan):
            layer = store._layers[depth]
            if match is None:
                row = layer.append(vecs[depth], labels[depth], parent)
                if depth > 0:
                    store._layers[depth - 1].children[parent].append(row)
            else:
                row = match
                layer.sums[row] += vecs[depth]
                layer.counts[row] += 1
                mean = layer.sums[row] / np.linalg.norm(layer.sums[row])
                layer.vectors[row] = as_float32_exact(mean)
            parent = row

        ep = store.episode_layer
        row = ep.append(vecs[L - 1], "", parent)
        ep.texts.append(record.episode_text)
        ep.profiles.append(record.profile)
        ts = float(record.timestamp)
        ep.timestamps[row] = ts
        ep.weight[row] = 1.0
        ep.strength[row] = cfg.min_strength
        ep.last_access[row] = ts
        ep.decay_anchor[row] = ts
        ep.access_count[row] = 0
        store._layers[L - 2].children[parent].append(row)
    return NodeId(L, row)


def verify_integrity(store: MemoryStore) -> list[Violation]:
    """List every structural problem found; an empty list means healthy."""
    out: list[Violation] = []
    cfg = store.config
    L = store.levels
    with store.reading():
        claimed: list[dict[int, int]] = [dict() for _ in range(L)]
        for depth, layer in enumerate(store._layers):
            rows = layer.live_rows()
            norms = np.linalg.norm(layer.vectors[rows], axis=1)
            for r in rows[np.abs(norms - 1.0) > UNIT_TOL]:
                out.append(Violation("norm", NodeId(depth + 1, int(r)),
                                     f"|v| = {np.linalg.norm(layer.vectors[r]):.9f}"))
            if not layer.episodes:
                nxt = store._layers[depth + 1]
                for r in rows:
                    r = int(r)
                    seen = set()
                    for c in layer.children[r]:
                        edge = f"edge {NodeId(depth + 1, r)} -> {NodeId(depth + 2, c)}"
                        if c in seen:
                            out.append(Violation("duplicate-child", NodeId(depth + 1, r), edge))
                            continue
                        seen.add(c)
                        if not (isinstance(c, (int, np.integer)) and 0 <= c < nxt.size):
                            out.append(Violation("dangling-child", NodeId(depth + 1, r),
                                                 f"{edge}: child does not exist"))
                        elif not nxt.live[c]:
                            out.append(Violation("dead-child", NodeId(depth + 1, r),
                                                 f"{edge}: child is tombstoned"))
                        elif nxt.parents[c] != r:
                            out.append(Violation("parent-mismatch", NodeId(depth + 1, r),
                                                 f"{edge}: child's parent is {int(nxt.parents[c])}"))
                        else:
                            claimed[depth + 1][int(c)] = r
            for r in rows:
                r = int(r)
                p = int(layer.parents[r])
                if depth == 0:
                    if p != -1:
                        out.append(Violation("root-parent", NodeId(1, r), f"layer-1 node has parent {p}"))
                elif claimed[depth].get(r) != p:
                    out.append(Violation("orphan", NodeId(depth + 1, r),
                                         f"parent {NodeId(depth, p)} does not list this node"))
        ep = store.episode_layer
        rows = ep.live_rows()
        w = ep.weight[rows]
        for r in rows[(w < cfg.min_weight) | (w > cfg.max_weight)]:
            out.append(Violation("weight-bounds", NodeId(L, int(r)), f"weight {ep.weight[r]}"))
        for r in rows[ep.strength[rows] < cfg.min_strength]:
            out.append(Violation("strength-bounds", NodeId(L, int(r)), f"strength {ep.strength[r]}"))
        for r in rows[ep.access_count[rows] < 0]:
            out.append(Violation("access-count", NodeId(L, int(r)), f"{ep.access_count[r]}"))
    return out


def adjust_depth(store: MemoryStore, new_levels: int) -> MemoryStore:
    if new_levels == store.levels:
        return store
    if not MIN_LEVELS <= new_levels <= MAX_LEVELS:
        raise ConfigError("levels", f"must be [{MIN_LEVELS}, {MAX_LEVELS}], got {new_levels}")
    with store.writing():
        if any(store.node_counts()):
            raise UnsupportedOperationError(
                f"cannot change depth {store.levels} -> {new_levels} on a populated store")
        store.config = store.config.replace(levels=new_levels)
        store._reset_layers()
    return store


def _tombstone(store: MemoryStore, depth: int, row: int) -> int:
    """Tombstone a node and any ancestors left without children."""
    pruned = 0
    while True:
        layer = store._layers[depth]
        layer.live[row] = False
        layer.dead += 1
        pruned += 1
        parent = int(layer.parents[row])
        if depth == 0 or parent < 0:
            return pruned
        siblings = store._layers[depth - 1].children[parent]
        siblings.remove(row)
        if siblings:
            return pruned
        depth, row = depth - 1, parent


def compact(store: MemoryStore) -> int:
    """Tombstone episodes whose weight sits at the floor; returns nodes pruned."""
    cfg = store.config
    with store.writing():
        ep = store.episode_layer
        rows = ep.live_rows()
        doomed = rows[ep.weight[rows] <= cfg.min_weight + cfg.prune_epsilon]
        return sum(_tombstone(store, store.levels - 1, int(r)) for r in doomed)
