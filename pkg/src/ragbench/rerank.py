"""Score-based reranking of retrieved passages.

The scorer is abstract: an HTTP cross-encoder endpoint for real runs, a
token-overlap Jaccard scorer for tests. Ties are broken by the passage's
prior retrieval rank, preserving retriever evidence when the scorer is
indifferent.
"""

from __future__ import annotations

import os
import time
from typing import Protocol, Sequence

import requests

from .corpus import CorpusStore
from .models import QAItem, RetrievedPassage
from .sparse import tokenize

MAX_RERANK_INPUT = 300
PASSAGE_CHAR_BUDGET = 2000


class RerankError(RuntimeError):
    pass


class RelevanceScorer(Protocol):
    def score_pairs(self, query: str, passages: Sequence[str]) -> list[float]: ...


class JaccardScorer:
    """Deterministic test scorer: token-set Jaccard between query and passage."""

    def score_pairs(self, query: str, passages: Sequence[str]) -> list[float]:
        q = set(tokenize(query))
        scores = []
        for text in passages:
            p = set(tokenize(text))
            union = q | p
            scores.append(len(q & p) / len(union) if union else 0.0)
        return scores


class HttpCrossEncoderScorer:
    """POST {"query", "passages"} -> {"scores"} client with bounded retries."""

    def __init__(
        self,
        url: str,
        api_key_env: str = "RAGBENCH_RERANK_API_KEY",
        retries: int = 3,
        timeout: float = 30.0,
    ):
        self.url = url
        self.api_key = os.environ.get(api_key_env, "")
        self.retries = retries
        self.timeout = timeout
        self._session = requests.Session()

    def score_pairs(self, query: str, passages: Sequence[str]) -> list[float]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"query": query, "passages": list(passages)}
        last_exc: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = self._session.post(self.url, json=payload, headers=headers,
                                          timeout=self.timeout)
                resp.raise_for_status()
                scores = resp.json()["scores"]
                if len(scores) != len(passages):
                    raise RerankError(
                        f"scorer returned {len(scores)} scores for {len(passages)} passages"
                    )
                return [float(s) for s in scores]
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_exc = exc
                time.sleep(min(2.0**attempt, 8.0))
        raise RerankError(f"rerank request failed after {self.retries} attempts: {last_exc}")


def rerank(
    scorer: RelevanceScorer,
    query: str,
    passages: list[RetrievedPassage],
    k: int,
    corpus: CorpusStore,
    batch_size: int = 16,
    char_budget: int = PASSAGE_CHAR_BUDGET,
    max_input: int = MAX_RERANK_INPUT,
) -> list[RetrievedPassage]:
    """Reorder ``passages`` by scorer relevance and keep the top k.

    Output is a subset of the input doc ids, renumbered 1..k, with
    stage="reranked". Batching never affects results: scores are
    assembled strictly in input order before sorting.
    """
    if len(passages) > max_input:
        raise RerankError(f"rerank input of {len(passages)} exceeds limit {max_input}")
    if k <= 0 or not passages:
        return []
    texts = []
    for p in passages:
        doc = corpus.get(p.doc_id)
        if doc is None:
            raise RerankError(f"dangling doc id {p.doc_id!r} in rerank input")
        texts.append(doc.text[:char_budget])
    scores: list[float] = []
    for start in range(0, len(texts), batch_size):
        scores.extend(scorer.score_pairs(query, texts[start : start + batch_size]))
    if len(scores) != len(passages):
        raise RerankError(f"scorer returned {len(scores)} scores for {len(passages)} passages")
    order = sorted(range(len(passages)), key=lambda i: (-scores[i], passages[i].rank))
    return [
        RetrievedPassage(doc_id=passages[i].doc_id, score=scores[i],
                         rank=r, stage="reranked")
        for r, i in enumerate(order[:k], start=1)
    ]


def remaining_gold_fraction(qa: QAItem, reranked: Sequence[RetrievedPassage]) -> float:
    """Fraction of the item's gold documents surviving the rerank cut."""
    if not qa.gold_doc_ids:
        return 0.0
    present = {p.doc_id for p in reranked}
    return len(qa.gold_doc_ids & present) / len(qa.gold_doc_ids)
