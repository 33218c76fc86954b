"""scikit-learn style wrappers.

:class:`HierarchicalMemory` is a thin estimator over :class:`MemoryStore`:
``fit`` builds a fresh store from texts, ``partial_fit`` keeps adding to
it, and ``kneighbors`` runs routed retrieval. The store itself remains the
primary object; this module exists for pipelines that expect the
estimator protocol.
"""
from __future__ import annotations

import time
from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import HierarchyConfig
from .encoder import HashEmbedder
from .ingest import extract_stub, ingest_turn
from .records import DialogueTurn
from .retrieval import RetrievalResult, flat_retrieve, retrieve
from .store import MemoryStore
from .validation import check_unit_rows


def _as_texts(X) -> list[str]:
    if isinstance(X, str):
        raise TypeError("expected an iterable of strings, got a single string")
    texts = [x.text if isinstance(x, DialogueTurn) else x for x in X]
    bad = [type(t).__name__ for t in texts if not isinstance(t, str)]
    if bad:
        raise TypeError(f"expected strings or DialogueTurn objects, got {bad[0]}")
    return texts


class HashEmbeddingTransformer(TransformerMixin, BaseEstimator):
    """Stateless text to unit-vector transformer backed by the hash embedder."""

    def __init__(self, dim: int = 384):
        self.dim = dim

    def fit(self, X=None, y=None):
        self.embedder_ = HashEmbedder(self.dim)
        self.n_features_out_ = self.dim
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "embedder_")
        return self.embedder_.batch_embed(_as_texts(X))


class HierarchicalMemory(BaseEstimator):
    """Estimator facade over a hierarchical memory store.

    ``X`` is an iterable of texts (or :class:`DialogueTurn`); each one is
    extracted with ``extractor`` and inserted as one episode. Queries to
    :meth:`kneighbors` may be texts or a 2-D array of unit vectors.
    """

    def __init__(self, levels: int = 4, dim: int = 384, k_per_level: int = 10, final_n: int = 10,
                 merge_threshold: float = 0.85, extractor=None, embedder=None):
        self.levels = levels
        self.dim = dim
        self.k_per_level = k_per_level
        self.final_n = final_n
        self.merge_threshold = merge_threshold
        self.extractor = extractor
        self.embedder = embedder

    def _config(self) -> HierarchyConfig:
        return HierarchyConfig(levels=self.levels, dim=self.dim, k_per_level=self.k_per_level,
                               final_n=self.final_n, merge_threshold=self.merge_threshold)

    def fit(self, X, y=None):
        self.store_ = MemoryStore(self._config())
        self.embedder_ = self.embedder if self.embedder is not None else HashEmbedder(self.dim)
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        if not hasattr(self, "store_"):
            return self.fit(X)
        extractor = self.extractor or extract_stub
        clock = time.time()
        items = list(X) if not isinstance(X, str) else _as_texts(X)
        start = len(self.store_)
        for i, x in enumerate(items):
            turn = x if isinstance(x, DialogueTurn) else DialogueTurn(
                session_id="fit", turn_id=start + i, speaker="user",
                text=_as_texts([x])[0], timestamp=clock)
            ingest_turn(self.store_, self.embedder_, extractor, turn)
        self.n_episodes_ = len(self.store_)
        return self

    def _queries(self, X) -> np.ndarray:
        if isinstance(X, np.ndarray) and X.dtype.kind == "f":
            return check_unit_rows(np.atleast_2d(X), self.dim)
        return self.embedder_.batch_embed(_as_texts(X))

    def retrieve(self, X, *, flat: bool = False, n: int | None = None) -> list[RetrievalResult]:
        check_is_fitted(self, "store_")
        Q = self._queries(X)
        if flat:
            return [flat_retrieve(self.store_, q, n) for q in Q]
        return [retrieve(self.store_, q, None, n) for q in Q]

    def kneighbors(self, X, n_neighbors: int | None = None, return_distance: bool = True):
        """Routed nearest episodes per query.

        Returns episode row indices padded with -1 (and cosine distances
        padded with ``inf``) when fewer than ``n_neighbors`` are reachable.
        """
        n = n_neighbors or self.final_n
        results = self.retrieve(X, n=n)
        ind = np.full((len(results), n), -1, dtype=np.int64)
        dist = np.full((len(results), n), np.inf)
        for i, res in enumerate(results):
            for j, h in enumerate(res.hits):
                ind[i, j] = h.episode.row
                dist[i, j] = 1.0 - h.similarity
        return (dist, ind) if return_distance else ind

    def predict(self, X) -> list[str]:
        """Text of the best routed episode per query ("" when none)."""
        out = []
        for res in self.retrieve(X, n=1):
            out.append(self.store_.get_episode(res.hits[0].episode).text if res.hits else "")
        return out

    def texts(self, rows: Iterable[int]) -> list[str]:
        check_is_fitted(self, "store_")
        return [self.store_.episode_layer.texts[int(r)] for r in rows]
