"""Semantic retrieval: embedding providers and exact top-k cosine search.

The index does brute-force exact search by default; at desk scale that is
affordable and gives the recall/rerank experiments a noise-free baseline.
An ANN backend can be slotted in behind the same retrieval contract.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import requests

from .corpus import CorpusStore
from .models import RetrievedPassage
from .sparse import tokenize


class EmbeddingError(RuntimeError):
    pass


class EmbeddingProvider(Protocol):
    def dim(self) -> int: ...

    def embed(self, text: str) -> np.ndarray: ...

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


class HashingEmbedder:
    """Deterministic test embedder: hash tokens into buckets, L2-normalize.

    Stable across process restarts (sha1, not the salted builtin hash), and
    lexical-overlap correlated, which is all tests need.
    """

    def __init__(self, dim: int = 32):
        if dim <= 0:
            raise ValueError("dim must be > 0")
        self._dim = dim

    def dim(self) -> int:
        return self._dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self._dim, dtype=np.float64)
        for tok in tokenize(text):
            bucket = int.from_bytes(hashlib.sha1(tok.encode("utf-8")).digest()[:8], "big")
            vec[bucket % self._dim] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0  # tokenless text still gets a unit vector
            return vec
        return vec / norm

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


class HttpEmbeddingClient:
    """OpenAI-compatible embedding endpoint client with bounded retries."""

    def __init__(
        self,
        base_url: str,
        model: str,
        dim: int,
        api_key_env: str = "RAGBENCH_EMBED_API_KEY",
        batch_size: int = 32,
        retries: int = 3,
        timeout: float = 30.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self._dim = dim
        self.api_key = os.environ.get(api_key_env, "")
        self.batch_size = batch_size
        self.retries = retries
        self.timeout = timeout
        self._session = requests.Session()

    def dim(self) -> int:
        return self._dim

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            out.extend(self._request(list(texts[start : start + self.batch_size])))
        return out

    def _request(self, batch: list[str]) -> list[np.ndarray]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"input": batch, "model": self.model}
        last_exc: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = self._session.post(
                    f"{self.base_url}/embeddings", json=payload,
                    headers=headers, timeout=self.timeout,
                )
                resp.raise_for_status()
                data = resp.json()["data"]
                return [np.asarray(item["embedding"], dtype=np.float64) for item in data]
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_exc = exc
                time.sleep(min(2.0**attempt, 8.0))
        raise EmbeddingError(f"embedding request failed after {self.retries} attempts: {last_exc}")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity undefined for all-zero vector")
    return float(np.dot(a, b) / (na * nb))


@dataclass
class DenseIndex:
    """Immutable after build; concurrent retrieval is safe."""

    ids: list[str]
    vectors: np.ndarray  # (doc_count, dim), rows L2-normalized
    dim: int

    @property
    def doc_count(self) -> int:
        return len(self.ids)


def build_dense_index(corpus: CorpusStore, provider: EmbeddingProvider,
                      batch_size: int = 32) -> DenseIndex:
    dim = provider.dim()
    ids: list[str] = []
    rows: list[np.ndarray] = []
    docs = list(corpus)
    for start in range(0, len(docs), batch_size):
        chunk = docs[start : start + batch_size]
        try:
            vecs = provider.embed_batch([d.text for d in chunk])
        except Exception as exc:
            raise EmbeddingError(
                f"embedding failed for batch starting at doc {chunk[0].id!r}: {exc}"
            ) from exc
        for doc, vec in zip(chunk, vecs):
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dim,):
                raise EmbeddingError(
                    f"dim drift for doc {doc.id!r}: expected {dim}, got {vec.shape}"
                )
            if not np.all(np.isfinite(vec)):
                raise EmbeddingError(f"non-finite embedding for doc {doc.id!r}")
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                raise EmbeddingError(f"all-zero embedding for doc {doc.id!r}")
            ids.append(doc.id)
            rows.append(vec / norm)
    matrix = np.vstack(rows) if rows else np.zeros((0, dim), dtype=np.float64)
    return DenseIndex(ids=ids, vectors=matrix, dim=dim)


def dense_retrieve(index: DenseIndex, query_vector: np.ndarray, k: int) -> list[RetrievedPassage]:
    """Exact top-k by cosine descending, ties by doc id ascending."""
    q = np.asarray(query_vector, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValueError(f"dim mismatch: query {q.shape}, index dim {index.dim}")
    if k <= 0 or index.doc_count == 0:
        return []
    qnorm = float(np.linalg.norm(q))
    if qnorm == 0.0:
        raise ValueError("cosine similarity undefined for all-zero query vector")
    scores = index.vectors @ (q / qnorm)
    ids_arr = np.asarray(index.ids)
    order = np.lexsort((ids_arr, -scores))[:k]
    return [
        RetrievedPassage(doc_id=str(ids_arr[i]), score=float(scores[i]),
                         rank=r, stage="retrieved")
        for r, i in enumerate(order, start=1)
    ]
