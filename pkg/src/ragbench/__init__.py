"""Desk-scale RAG experimentation harness.

Pipeline: retrieve (BM25 or dense cosine) -> rerank -> generate (five
strategies) -> judge (LLM rubric), plus a grid runner with gold-recall,
latency and score aggregation.
"""

from .corpus import CorpusStore, load_corpus, load_qa_dataset, save_corpus
from .models import Document, QAItem, RetrievedPassage

__all__ = [
    "CorpusStore",
    "Document",
    "QAItem",
    "RetrievedPassage",
    "load_corpus",
    "load_qa_dataset",
    "save_corpus",
]
