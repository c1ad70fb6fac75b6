"""Lexical retrieval: tokenizer, inverted index, Okapi BM25, top-k search.

BM25 variant: Okapi with the +1-inside-log IDF,

    idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)

which is never negative, so scores on tiny corpora stay >= 0 and
documents with no query-term overlap score exactly 0 and are excluded
from results. Ties are broken by doc id ascending for reproducible runs.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CorpusStore
from .models import RetrievedPassage

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

INDEX_MAGIC = "ragbench-sparse-v1"


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class BM25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class SparseIndex:
    """Immutable after build; concurrent retrieval is safe."""

    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    avg_doc_length: float
    doc_count: int
    params: BM25Params = field(default_factory=BM25Params)


def build_sparse_index(corpus: CorpusStore, params: BM25Params | None = None) -> SparseIndex:
    params = params or BM25Params()
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in corpus:
        tokens = tokenize(doc.text)
        doc_lengths[doc.id] = len(tokens)
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for tok, tf in counts.items():
            postings.setdefault(tok, []).append((doc.id, tf))
    n = len(doc_lengths)
    avgdl = sum(doc_lengths.values()) / n if n else 0.0
    return SparseIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=avgdl,
        doc_count=n,
        params=params,
    )


def _idf(index: SparseIndex, term: str) -> float:
    df = len(index.postings.get(term, ()))
    return math.log((index.doc_count - df + 0.5) / (df + 0.5) + 1.0)


def bm25_score(index: SparseIndex, query_tokens: list[str], doc_id: str) -> float:
    if doc_id not in index.doc_lengths:
        raise KeyError(f"unknown doc id {doc_id!r}")
    k1, b = index.params.k1, index.params.b
    dl = index.doc_lengths[doc_id]
    score = 0.0
    for term in query_tokens:
        tf = 0
        for did, f in index.postings.get(term, ()):
            if did == doc_id:
                tf = f
                break
        if tf == 0:
            continue
        idf = _idf(index, term)
        denom = tf + k1 * (1.0 - b + b * dl / index.avg_doc_length)
        score += idf * (tf * (k1 + 1.0)) / denom
    return score


def sparse_retrieve(index: SparseIndex, query: str, k: int) -> list[RetrievedPassage]:
    """Top-k by BM25, score descending, ties by doc id ascending.

    Only documents with score > 0 are returned, so result lists never
    get padded with unrelated documents.
    """
    if k <= 0 or index.doc_count == 0:
        return []
    k1, b = index.params.k1, index.params.b
    avgdl = index.avg_doc_length
    scores: dict[str, float] = {}
    # Accumulate in query-token order so float summation matches a
    # per-document term-by-term evaluation of the formula exactly.
    for term in tokenize(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = _idf(index, term)
        for doc_id, tf in plist:
            dl = index.doc_lengths[doc_id]
            denom = tf + k1 * (1.0 - b + b * dl / avgdl)
            contrib = idf * (tf * (k1 + 1.0)) / denom
            scores[doc_id] = scores.get(doc_id, 0.0) + contrib
    ranked = sorted(
        ((doc_id, s) for doc_id, s in scores.items() if s > 0.0),
        key=lambda item: (-item[1], item[0]),
    )[:k]
    return [
        RetrievedPassage(doc_id=doc_id, score=s, rank=i, stage="retrieved")
        for i, (doc_id, s) in enumerate(ranked, start=1)
    ]


def save_sparse_index(index: SparseIndex, path: str | Path) -> None:
    payload = {
        "magic": INDEX_MAGIC,
        "params": {"k1": index.params.k1, "b": index.params.b},
        "doc_lengths": index.doc_lengths,
        "postings": {t: [[d, f] for d, f in pl] for t, pl in index.postings.items()},
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_sparse_index(path: str | Path) -> SparseIndex:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("magic") != INDEX_MAGIC:
        raise ValueError(f"{path}: not a sparse index file (bad magic)")
    doc_lengths = {d: int(n) for d, n in payload["doc_lengths"].items()}
    n = len(doc_lengths)
    return SparseIndex(
        postings={t: [(d, int(f)) for d, f in pl] for t, pl in payload["postings"].items()},
        doc_lengths=doc_lengths,
        avg_doc_length=sum(doc_lengths.values()) / n if n else 0.0,
        doc_count=n,
        params=BM25Params(**payload["params"]),
    )
