"""Routed vs flat retrieval cost as the store grows.

Turns are ingested one at a time into a single store that is never
cleared. A task is one ingested turn; the turn's own text is the query.
Every ``query_every`` tasks (and at every checkpoint) the query runs
through both :func:`retrieve` and :func:`flat_retrieve`. A checkpoint is
recorded every ``checkpoint_every`` tasks, at the last task of each task
type, and at the end.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import HierarchyConfig
from .encoder import HashEmbedder
from .ingest import Extractor, extract_stub, level_texts, load_corpus
from .records import DialogueTurn
from .retrieval import flat_retrieve, retrieve
from .store import MemoryStore, insert


@dataclass
class BenchConfig:
    hierarchy: HierarchyConfig = field(default_factory=HierarchyConfig)
    k: int | None = None
    n: int | None = None
    checkpoint_every: int = 10
    query_every: int = 1


@dataclass
class Checkpoint:
    tasks: int
    task: str
    episodes: int
    hier_ops: int
    flat_ops: int
    hier_ms: float
    flat_ms: float
    queries: int


@dataclass
class Segment:
    task: str
    tasks: int
    queries: int
    episodes: int
    hier_ops: float
    flat_ops: float
    hier_ms: float
    flat_ms: float


COLUMNS = ("tasks", "task", "episodes", "hier_ops", "flat_ops", "hier_ms", "flat_ms", "queries")


@dataclass
class BenchReport:
    dim: int
    checkpoints: list[Checkpoint]
    segments: list[Segment]
    config: dict = field(default_factory=dict)

    @property
    def final_speedup(self) -> float:
        seg = self.segments[-1]
        return seg.flat_ms / seg.hier_ms if seg.hier_ms > 0 else float("inf")

    def sim_op_columns(self) -> list[tuple[int, int, int, int]]:
        return [(c.tasks, c.episodes, c.hier_ops, c.flat_ops) for c in self.checkpoints]

    def rows(self) -> list[dict]:
        return [asdict(c) for c in self.checkpoints]

    def to_json(self) -> str:
        return json.dumps({
            "dim": self.dim,
            "config": self.config,
            "checkpoints": self.rows(),
            "segments": [asdict(s) for s in self.segments],
            "final_speedup": self.final_speedup,
        }, indent=2)

    def to_tsv(self) -> str:
        """Plot-ready table, one row per checkpoint, with ops times dim as well."""
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(COLUMNS + ("hier_mults", "flat_mults"))
        for c in self.checkpoints:
            w.writerow([c.tasks, c.task, c.episodes, c.hier_ops, c.flat_ops, f"{c.hier_ms:.4f}",
                        f"{c.flat_ms:.4f}", c.queries, c.hier_ops * self.dim, c.flat_ops * self.dim])
        return buf.getvalue()

    def summary_table(self) -> str:
        head = ("task", "method", "episodes", "sim-ops/query", "ops x D", "mean ms")
        lines = []
        for s in self.segments:
            for method, ops, ms in (("flat", s.flat_ops, s.flat_ms), ("routed", s.hier_ops, s.hier_ms)):
                lines.append((s.task, method, str(s.episodes), f"{ops:.1f}", f"{ops * self.dim:.3e}", f"{ms:.3f}"))
        widths = [max(len(r[i]) for r in [head, *lines]) for i in range(len(head))]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        out = [fmt.format(*head), fmt.format(*("-" * w for w in widths))]
        out += [fmt.format(*r) for r in lines]
        out.append(f"final-segment wall-clock speedup (flat / routed): {self.final_speedup:.2f}x")
        return "\n".join(out)

    def write(self, path) -> tuple[Path, Path]:
        path = Path(path)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        tsv = path.with_suffix(".tsv")
        tsv.write_text(self.to_tsv(), encoding="utf-8")
        return path, tsv


def bench(corpus, config: BenchConfig | None = None, *, extractor: Extractor = extract_stub,
          embedder=None, store: MemoryStore | None = None) -> BenchReport:
    """Run the accumulation benchmark over ``corpus`` (turns or a corpus path)."""
    cfg = config or BenchConfig()
    turns: Sequence[DialogueTurn] = load_corpus(corpus) if isinstance(corpus, (str, Path)) else list(corpus)
    store = store if store is not None else MemoryStore(cfg.hierarchy)
    embedder = embedder or HashEmbedder(store.dim)
    every = max(1, cfg.checkpoint_every)
    q_every = max(1, cfg.query_every)

    checkpoints: list[Checkpoint] = []
    seg_stats: dict[str, list] = {}
    seg_order: list[str] = []
    win = [0, 0.0, 0.0]  # queries, hier seconds, flat seconds since last checkpoint

    for i, turn in enumerate(turns, start=1):
        record = extractor(turn).validate()
        vectors = np.asarray(embedder.batch_embed(level_texts(record, store.levels)))
        insert(store, record, vectors)

        task = turn.task or "all"
        if task not in seg_stats:
            seg_stats[task] = [0, 0, 0, 0.0, 0.0, 0.0, 0]
            seg_order.append(task)
        nxt = (turns[i].task or "all") if i < len(turns) else None
        is_checkpoint = i % every == 0 or nxt != task
        if not (is_checkpoint or i % q_every == 0):
            seg_stats[task][0] += 1
            continue

        query = vectors[-1]
        hier = retrieve(store, query, cfg.k, cfg.n, now=turn.timestamp)
        flat = flat_retrieve(store, query, cfg.n)
        win[0] += 1
        win[1] += hier.elapsed
        win[2] += flat.elapsed
        st = seg_stats[task]
        st[0] += 1
        st[1] += 1
        st[2] += hier.sim_ops
        st[3] += flat.sim_ops
        st[4] += hier.elapsed
        st[5] += flat.elapsed
        st[6] = len(store)
        if is_checkpoint:
            checkpoints.append(Checkpoint(
                tasks=i, task=task, episodes=len(store), hier_ops=hier.sim_ops, flat_ops=flat.sim_ops,
                hier_ms=win[1] / win[0] * 1e3, flat_ms=win[2] / win[0] * 1e3, queries=win[0]))
            win = [0, 0.0, 0.0]

    segments = []
    for task in seg_order:
        tasks, q, h_ops, f_ops, h_s, f_s, eps = seg_stats[task]
        q = max(q, 1)
        segments.append(Segment(task=task, tasks=tasks, queries=q, episodes=eps,
                                hier_ops=h_ops / q, flat_ops=f_ops / q,
                                hier_ms=h_s / q * 1e3, flat_ms=f_s / q * 1e3))
    return BenchReport(dim=store.dim, checkpoints=checkpoints, segments=segments,
                       config={"hierarchy": store.config.to_dict(), "k": cfg.k, "n": cfg.n,
                               "checkpoint_every": every, "query_every": q_every})
