"""Independent reference implementations used as test oracles.

These deliberately avoid the package's index structures: BM25 is
evaluated term by term straight from the formula over raw token lists,
and dense search is an all-pairs cosine loop. They stay independent of
the code paths they check.
"""

from __future__ import annotations

import math
import re

import numpy as np

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def ref_tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def ref_bm25_score(docs: dict[str, str], query_tokens: list[str], doc_id: str,
                   k1: float = 1.2, b: float = 0.75) -> float:
    tokenized = {d: ref_tokenize(t) for d, t in docs.items()}
    n = len(tokenized)
    lengths = {d: len(toks) for d, toks in tokenized.items()}
    avgdl = sum(lengths.values()) / n if n else 0.0
    doc_tokens = tokenized[doc_id]
    score = 0.0
    for term in query_tokens:
        tf = doc_tokens.count(term)
        if tf == 0:
            continue
        df = sum(1 for toks in tokenized.values() if term in toks)
        idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
        denom = tf + k1 * (1.0 - b + b * lengths[doc_id] / avgdl)
        score += idf * (tf * (k1 + 1.0)) / denom
    return score


def ref_bm25_rank(docs: dict[str, str], query: str, k: int,
                  k1: float = 1.2, b: float = 0.75) -> list[tuple[str, float]]:
    """Score every document and sort (score desc, doc id asc), dropping zeros."""
    query_tokens = ref_tokenize(query)
    scored = [
        (doc_id, ref_bm25_score(docs, query_tokens, doc_id, k1, b)) for doc_id in docs
    ]
    scored = [(d, s) for d, s in scored if s > 0.0]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def ref_dense_rank(entries: list[tuple[str, np.ndarray]], query: np.ndarray,
                   k: int) -> list[tuple[str, float]]:
    """Brute-force all-pairs cosine, sorted (cosine desc, doc id asc)."""
    scored = []
    for doc_id, vec in entries:
        cos = float(np.dot(vec, query) / (np.linalg.norm(vec) * np.linalg.norm(query)))
        scored.append((doc_id, cos))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
