"""Shared dataclasses for documents, QA items and ranked results."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class QAItem:
    id: str
    question: str
    gold_answer: str
    gold_doc_ids: frozenset[str]
    hop: str  # "single" | "multi"
    categories: tuple[str, ...] = ()


@dataclass(frozen=True)
class RetrievedPassage:
    """One entry of a ranked result list.

    ``rank`` is 1-based and contiguous within a list; ``stage`` records
    whether the list came straight from a retriever or from a reranker.
    """

    doc_id: str
    score: float
    rank: int
    stage: str = "retrieved"  # "retrieved" | "reranked"
