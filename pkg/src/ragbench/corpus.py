"""Corpus and QA dataset loading.

Both files are newline-delimited JSON, one object per line:

    corpus: {"id": str, "text": str, "metadata": {str: str}?}
    qa:     {"id": str, "question": str, "gold_answer": str,
             "gold_doc_ids": [str, ...], "hop": "single"|"multi",
             "categories": [str, ...]?}

Validation is fail-fast: malformed input raises at load time with the
offending line number, never later during retrieval.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator

from .models import Document, QAItem


class CorpusError(ValueError):
    """Raised for malformed corpus or QA dataset files."""


class CorpusStore:
    """Immutable id -> Document map. Safe for concurrent reads after load."""

    def __init__(self, documents: dict[str, Document]):
        self._docs = documents

    @property
    def count(self) -> int:
        return len(self._docs)

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def __getitem__(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    def get(self, doc_id: str) -> Document | None:
        """Lookup that signals a missing id with None, never an empty doc."""
        return self._docs.get(doc_id)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs.values())

    def ids(self) -> list[str]:
        return list(self._docs.keys())


def _iter_json_lines(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON record: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: record is not an object")
            yield lineno, obj


def load_corpus(path: str | Path) -> CorpusStore:
    docs: dict[str, Document] = {}
    first_line: dict[str, int] = {}
    for lineno, obj in _iter_json_lines(path):
        doc_id = obj.get("id")
        if not isinstance(doc_id, str) or not doc_id:
            raise CorpusError(f"{path}:{lineno}: missing or empty 'id'")
        text = obj.get("text")
        if not isinstance(text, str) or not text.strip():
            raise CorpusError(f"{path}:{lineno}: empty 'text' for document {doc_id!r}")
        if doc_id in docs:
            raise CorpusError(
                f"{path}:{lineno}: duplicate document id {doc_id!r} "
                f"(first seen on line {first_line[doc_id]})"
            )
        metadata = obj.get("metadata") or {}
        if not isinstance(metadata, dict):
            raise CorpusError(f"{path}:{lineno}: 'metadata' must be an object")
        docs[doc_id] = Document(id=doc_id, text=text, metadata=dict(metadata))
        first_line[doc_id] = lineno
    return CorpusStore(docs)


def save_corpus(store: CorpusStore, path: str | Path) -> None:
    """Write a store back in the load format; load(save(s)) round-trips."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in store:
            rec: dict = {"id": doc.id, "text": doc.text}
            if doc.metadata:
                rec["metadata"] = doc.metadata
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_qa_dataset(path: str | Path, corpus: CorpusStore) -> list[QAItem]:
    items: list[QAItem] = []
    seen_ids: set[str] = set()
    for lineno, obj in _iter_json_lines(path):
        qa_id = obj.get("id")
        if not isinstance(qa_id, str) or not qa_id:
            raise CorpusError(f"{path}:{lineno}: missing or empty 'id'")
        if qa_id in seen_ids:
            raise CorpusError(f"{path}:{lineno}: duplicate QA id {qa_id!r}")
        question = obj.get("question")
        gold_answer = obj.get("gold_answer")
        if not isinstance(question, str) or not question.strip():
            raise CorpusError(f"{path}:{lineno}: missing 'question' for {qa_id!r}")
        if not isinstance(gold_answer, str):
            raise CorpusError(f"{path}:{lineno}: missing 'gold_answer' for {qa_id!r}")
        hop = obj.get("hop")
        if hop not in ("single", "multi"):
            raise CorpusError(f"{path}:{lineno}: 'hop' must be 'single' or 'multi', got {hop!r}")
        gold_ids = obj.get("gold_doc_ids")
        if not isinstance(gold_ids, list) or not all(isinstance(g, str) for g in gold_ids):
            raise CorpusError(f"{path}:{lineno}: 'gold_doc_ids' must be a list of strings")
        gold_set = frozenset(gold_ids)
        if hop == "single" and len(gold_set) != 1:
            raise CorpusError(
                f"{path}:{lineno}: cardinality mismatch for {qa_id!r}: "
                f"hop=single requires exactly 1 gold doc, got {len(gold_set)}"
            )
        if hop == "multi" and len(gold_set) < 2:
            raise CorpusError(
                f"{path}:{lineno}: cardinality mismatch for {qa_id!r}: "
                f"hop=multi requires >= 2 gold docs, got {len(gold_set)}"
            )
        for gid in sorted(gold_set):
            if gid not in corpus:
                raise CorpusError(
                    f"{path}:{lineno}: dangling gold document {gid!r} for {qa_id!r}"
                )
        categories = obj.get("categories") or []
        if not isinstance(categories, list):
            raise CorpusError(f"{path}:{lineno}: 'categories' must be a list")
        items.append(
            QAItem(
                id=qa_id,
                question=question,
                gold_answer=gold_answer,
                gold_doc_ids=gold_set,
                hop=hop,
                categories=tuple(categories),
            )
        )
        seen_ids.add(qa_id)
    return items
