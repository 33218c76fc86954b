"""HTTP JSON service over one in-process store.

Writes are serialized through a single lock; retrieval runs concurrently.
While a snapshot is being written, write endpoints answer 503.
"""
from __future__ import annotations

import json
import threading
import time
from itertools import count
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .dynamics import Feedback, apply_feedback, decay
from .encoder import HashEmbedder
from .exceptions import HMemError, NotFoundError, TransportError, ValidationError
from .ingest import extract_stub, ingest_turn
from .persistence import save
from .records import DialogueTurn
from .retrieval import flat_retrieve, retrieve
from .store import MemoryStore, NodeId, compact


class TurnIn(BaseModel):
    text: str
    speaker: str = "user"
    session_id: str = "api"
    turn_id: int | None = None
    timestamp: float | None = None


class FeedbackIn(BaseModel):
    episode: str
    kind: str
    factor: float | None = None
    now: float | None = None


class DecayIn(BaseModel):
    now: float


class _Busy(Exception):
    pass


def hit_rows(store: MemoryStore, result) -> list[dict]:
    """Hits enriched with labels and text; shared by the CLI and the service."""
    rows = []
    for rank, h in enumerate(result.hits, start=1):
        ep = store.get_episode(h.episode)
        rows.append({
            "rank": rank,
            "episode": str(h.episode),
            "similarity": h.similarity,
            "weight": h.weight,
            "score": h.score,
            "path": [str(p) for p in h.path],
            "labels": store.path_labels(h.path[:-1]),
            "text": ep.text,
        })
    return rows


def create_app(store: MemoryStore, *, embedder=None, extractor=extract_stub,
               store_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="hiermem")
    embedder = embedder or HashEmbedder(store.dim)
    writer = threading.Lock()
    saving = threading.Event()
    turn_ids = count()

    def write(fn):
        if saving.is_set():
            raise _Busy()
        with writer:
            if saving.is_set():
                raise _Busy()
            return fn()

    @app.exception_handler(_Busy)
    async def _busy(request: Request, exc: _Busy):
        return JSONResponse({"error": "snapshot in progress, retry later"}, status_code=503)

    @app.exception_handler(HMemError)
    async def _hmem(request: Request, exc: HMemError):
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, TransportError):
            status = 502
        else:
            status = 400
        return JSONResponse({"error": str(exc), "type": type(exc).__name__}, status_code=status)

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz():
        return "ok"

    @app.post("/ingest")
    def ingest(turn: TurnIn):
        t = DialogueTurn(
            session_id=turn.session_id,
            turn_id=turn.turn_id if turn.turn_id is not None else next(turn_ids),
            speaker=turn.speaker,
            text=turn.text,
            timestamp=turn.timestamp if turn.timestamp is not None else time.time(),
        )
        node = write(lambda: ingest_turn(store, embedder, extractor, t))
        return {"episode": str(node)}

    @app.get("/retrieve")
    def get_retrieve(q: str | None = None, vector: str | None = None,
                     k: int | None = Query(None, ge=1), n: int | None = Query(None, ge=1),
                     flat: bool = False, now: float | None = None):
        if vector is not None:
            try:
                qv = json.loads(vector)
            except json.JSONDecodeError:
                raise ValidationError("vector must be a JSON list of numbers") from None
        elif q is not None:
            qv = embedder.embed(q)
        else:
            raise ValidationError("pass either q (text) or vector (JSON list)")
        result = flat_retrieve(store, qv, n) if flat else retrieve(store, qv, k, n, now=now)
        body = result.to_dict()
        body["hits"] = hit_rows(store, result)
        return body

    @app.post("/feedback")
    def post_feedback(body: FeedbackIn):
        fb = Feedback(body.kind, body.factor)
        node = NodeId.parse(body.episode)
        now = body.now if body.now is not None else time.time()
        weight = write(lambda: apply_feedback(store, node, fb, now))
        return {"episode": str(node), "kind": fb.kind.value, "weight": weight,
                "effective_factor": fb.multiplier(store.config)}

    @app.post("/decay")
    def post_decay(body: DecayIn):
        return {"updated": write(lambda: decay(store, body.now))}

    @app.post("/compact")
    def post_compact():
        return {"pruned": write(lambda: compact(store))}

    @app.post("/snapshot")
    def post_snapshot():
        if store_dir is None:
            raise ValidationError("service was started without a store directory")
        with writer:
            saving.set()
            try:
                manifest = save(store, store_dir)
            finally:
                saving.clear()
        return {"path": str(store_dir), "layers": manifest["layers"]}

    @app.get("/stats")
    def stats():
        return {
            "levels": store.levels,
            "dim": store.dim,
            "node_counts": store.node_counts(),
            "episodes": len(store),
            "counters": store.counters(),
        }

    return app


def serve(store: MemoryStore, addr: str, **kwargs):
    import uvicorn

    host, _, port = addr.rpartition(":")
    uvicorn.run(create_app(store, **kwargs), host=host or "127.0.0.1", port=int(port))
