import json

import pytest

from ragbench.corpus import CorpusStore, load_corpus
from ragbench.models import Document


def make_corpus(texts: dict[str, str]) -> CorpusStore:
    return CorpusStore({doc_id: Document(id=doc_id, text=text) for doc_id, text in texts.items()})


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


@pytest.fixture
def tiny_corpus():
    """3-doc corpus used by the frozen BM25 fixture values."""
    return make_corpus({"d1": "cat sat", "d2": "cat cat dog", "d3": "dog runs"})


@pytest.fixture
def corpus_file(tmp_path):
    def _write(records, name="corpus.jsonl"):
        return write_jsonl(tmp_path / name, records)

    return _write


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULT_LINES", None) if module else None
    if lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in lines:
            terminalreporter.write_line(line)
