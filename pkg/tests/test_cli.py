import csv
import json

import pytest

from ragbench.cli import main

from conftest import write_jsonl


@pytest.fixture
def data_dir(tmp_path):
    corpus = [
        {"id": f"d{i}", "text": f"topic {i} facts about item {i} and apples"}
        for i in range(1, 9)
    ]
    write_jsonl(tmp_path / "corpus.jsonl", corpus)
    qa = [
        {"id": "q1", "question": "facts about item 1", "gold_answer": "a1",
         "gold_doc_ids": ["d1"], "hop": "single"},
        {"id": "q2", "question": "facts about item 2 and item 3", "gold_answer": "a2",
         "gold_doc_ids": ["d2", "d3"], "hop": "multi"},
    ]
    write_jsonl(tmp_path / "qa.jsonl", qa)
    config = {
        "corpus": {"path": str(tmp_path / "corpus.jsonl"),
                   "qa_path": str(tmp_path / "qa.jsonl")},
        "retriever": {"kind": "sparse", "k": 5},
        "reranker": {"kind": "jaccard", "k": 3},
        "generation": {"strategy": "simple", "ordering": "inverted",
                       "llm": {"kind": "stub"}},
        "judge": {"llm": {"kind": "fixed-judge"}, "include_gold": True},
        "grid": {"k_retrieve": [3, 5], "k_rerank": [2], "strategies": ["simple"],
                 "orderings": ["standard", "inverted"]},
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    return tmp_path


def test_index_build_sparse(data_dir, capsys):
    assert main(["index", "build", "--corpus", str(data_dir / "corpus.jsonl"),
                 "--kind", "sparse", "--out", str(data_dir / "idx.json")]) == 0
    assert "8 docs" in capsys.readouterr().out
    assert (data_dir / "idx.json").exists()


def test_index_build_dense(data_dir, capsys):
    assert main(["index", "build", "--corpus", str(data_dir / "corpus.jsonl"),
                 "--kind", "dense", "--dim", "16"]) == 0
    assert "dim 16" in capsys.readouterr().out


def test_retrieve_sparse(data_dir, capsys):
    assert main(["retrieve", "--query", "facts about item 1", "--k", "3",
                 "--kind", "sparse", "--corpus", str(data_dir / "corpus.jsonl")]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split("\t")[1] == "d1"


def test_retrieve_dense(data_dir, capsys):
    assert main(["retrieve", "--query", "apples", "--k", "2",
                 "--kind", "dense", "--corpus", str(data_dir / "corpus.jsonl")]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2


def test_run_writes_outputs(data_dir):
    out = data_dir / "out"
    assert main(["run", "--config", str(data_dir / "config.json"),
                 "--dataset", str(data_dir / "qa.jsonl"), "--out", str(out)]) == 0
    for name in ("records.csv", "runs.jsonl", "report.csv", "report.md", "recall_vs_k.csv"):
        assert (out / name).exists()
    with open(out / "records.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 3  # header + 2 QA items


def test_grid_runs_cross_product(data_dir):
    out = data_dir / "gridout"
    assert main(["grid", "--grid", str(data_dir / "config.json"),
                 "--dataset", str(data_dir / "qa.jsonl"), "--out", str(out)]) == 0
    with open(out / "records.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    # 2 k_retrieve x 1 k_rerank x 1 strategy x 2 orderings x 2 items
    assert len(rows) == 1 + 8


def test_bench_prints_stats(data_dir, capsys):
    assert main(["bench", "--kind", "sparse", "--corpus", str(data_dir / "corpus.jsonl"),
                 "--ks", "1,3", "--reps", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("k\t")
    assert len(lines) == 3


def test_judge_rejudges_records(data_dir, capsys):
    out = data_dir / "out2"
    main(["run", "--config", str(data_dir / "config.json"),
          "--dataset", str(data_dir / "qa.jsonl"), "--out", str(out)])
    capsys.readouterr()
    assert main(["judge", "--records", str(out / "records.csv"),
                 "--config", str(data_dir / "config.json")]) == 0
    assert "mean correctness" in capsys.readouterr().out
    assert (out / "rejudged.csv").exists()


def test_judge_missing_details_errors(data_dir, tmp_path, capsys):
    lonely = tmp_path / "lonely.csv"
    lonely.write_text("x")
    assert main(["judge", "--records", str(lonely),
                 "--config", str(data_dir / "config.json")]) == 1
