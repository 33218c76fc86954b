"""Text embedders producing unit vectors.

:class:`HashEmbedder` is a deterministic offline stand-in: signed
character-trigram hashing over UTF-8 bytes. Each text is padded with two
zero bytes at both ends, every 3-byte window is hashed with 64-bit FNV-1a,
the bucket is ``h mod D`` and the sign is the parity of the popcount of
``h`` (odd means -1). The bucket counts are L2-normalized. Empty text, and
the rare text whose counts cancel to zero, map to ``e_1``.

:class:`RemoteEmbedder` talks to an embeddings endpoint using the common
``{"input": [...], "model": ...}`` -> ``{"data": [{"embedding": [...]}]}``
shape.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Protocol, Sequence

import httpx
import numpy as np

from ._http import post_json
from .exceptions import DegenerateInputError, DimensionError, MalformedResponseError

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...

    def batch_embed(self, texts: Sequence[str]) -> np.ndarray: ...


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


def _parity64(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        x ^= x >> np.uint64(shift)
    return x & np.uint64(1)


def hash_counts(texts: Sequence[str], dim: int) -> np.ndarray:
    """Signed trigram bucket counts, one row per text."""
    m = len(texts)
    encoded = [b"\0\0" + t.encode("utf-8") + b"\0\0" for t in texts]
    lengths = np.fromiter((len(e) for e in encoded), dtype=np.int64, count=m)
    if m == 0:
        return np.zeros((0, dim))
    buf = np.frombuffer(b"".join(encoded), dtype=np.uint8)
    seg_start = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    n_tri = lengths - 2
    seg = np.repeat(np.arange(m), n_tri)
    offs = np.arange(int(n_tri.sum())) - np.repeat(np.cumsum(n_tri) - n_tri, n_tri)
    pos = seg_start[seg] + offs
    h = np.full(pos.shape, FNV_OFFSET, dtype=np.uint64)
    prime = np.uint64(FNV_PRIME)
    with np.errstate(over="ignore"):
        for j in range(3):
            h ^= buf[pos + j].astype(np.uint64)
            h *= prime
    bucket = (h % np.uint64(dim)).astype(np.int64)
    sign = 1.0 - 2.0 * _parity64(h).astype(np.float64)
    counts = np.bincount(seg * dim + bucket, weights=sign, minlength=m * dim)
    return counts.reshape(m, dim)


class HashEmbedder:
    kind = "hash"

    def __init__(self, dim: int = 384):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)

    def batch_embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        counts = hash_counts(texts, self.dim)
        norms = np.linalg.norm(counts, axis=1)
        out = np.zeros_like(counts)
        ok = (norms > 0) & np.array([t != "" for t in texts], dtype=bool)
        out[ok] = counts[ok] / norms[ok, None]
        out[~ok, 0] = 1.0
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.batch_embed([text])[0]

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


def hash_embed(text: str, dim: int = 384) -> np.ndarray:
    return HashEmbedder(dim).embed(text)


class RemoteEmbedder:
    """Client for an HTTP embeddings endpoint.

    Batches of ``batch_size`` texts are sent with up to ``max_in_flight``
    concurrent requests; results come back in input order and unit-norm.
    """

    kind = "remote"

    def __init__(self, url: str, model: str, dim: int, *, timeout: float = 30.0,
                 batch_size: int = 64, max_in_flight: int = 4, attempts: int = 3,
                 backoff: float = 0.5, client: httpx.Client | None = None):
        self.url = url
        self.model = model
        self.dim = int(dim)
        self.timeout = timeout
        self.batch_size = max(1, int(batch_size))
        self.max_in_flight = max(1, int(max_in_flight))
        self.attempts = attempts
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)

    @classmethod
    def from_env(cls, dim: int, **kwargs) -> RemoteEmbedder:
        url = os.environ.get("HMEM_EMBED_URL")
        model = os.environ.get("HMEM_EMBED_MODEL")
        if not url or not model:
            raise ValueError("HMEM_EMBED_URL and HMEM_EMBED_MODEL must be set")
        timeout_ms = os.environ.get("HMEM_EMBED_TIMEOUT_MS")
        if timeout_ms:
            kwargs.setdefault("timeout", float(timeout_ms) / 1000.0)
        return cls(url, model, dim, **kwargs)

    def _request(self, texts: list[str]) -> np.ndarray:
        body = post_json(self._client, self.url, {"input": texts, "model": self.model},
                         attempts=self.attempts, backoff=self.backoff, timeout=self.timeout)
        data = body.get("data")
        if not isinstance(data, list) or len(data) != len(texts):
            raise MalformedResponseError(
                f"expected {len(texts)} embeddings in 'data', got "
                f"{len(data) if isinstance(data, list) else type(data).__name__}")
        if all(isinstance(d, dict) and "index" in d for d in data):
            data = sorted(data, key=lambda d: d["index"])
        try:
            vecs = np.array([d["embedding"] for d in data], dtype=np.float64)
        except (KeyError, TypeError, ValueError):
            raise MalformedResponseError("embedding items must carry a numeric 'embedding' list") from None
        if vecs.ndim != 2:
            raise MalformedResponseError("embeddings have inconsistent lengths")
        if vecs.shape[1] != self.dim:
            raise DimensionError(f"endpoint returned {vecs.shape[1]}-dim vectors, store expects {self.dim}")
        norms = np.linalg.norm(vecs, axis=1)
        if np.any(norms == 0) or not np.all(np.isfinite(norms)):
            raise DegenerateInputError("endpoint returned a zero or non-finite embedding")
        return vecs / norms[:, None]

    def batch_embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.zeros((0, self.dim))
        batches = [texts[i:i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        if len(batches) == 1 or self.max_in_flight == 1:
            parts = [self._request(b) for b in batches]
        else:
            with ThreadPoolExecutor(self.max_in_flight) as pool:
                parts = list(pool.map(self._request, batches))
        return np.vstack(parts)

    def embed(self, text: str) -> np.ndarray:
        return self.batch_embed([text])[0]

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "model": self.model}
