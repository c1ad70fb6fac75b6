#!/usr/bin/env python3
"""End-to-end offline demo: synthesize data, run a retrieval/generation grid
with the stub LLM and fixed judge, and print the markdown report.

Everything runs locally; no API keys required.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

from ragbench.cli import main as ragbench_main


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--work-dir", type=Path, default=Path("demo_out"))
    args = parser.parse_args()

    work = args.work_dir
    work.mkdir(parents=True, exist_ok=True)
    subprocess.run(
        [sys.executable, str(Path(__file__).with_name("make_synthetic_data.py")),
         "--out-dir", str(work / "data")],
        check=True,
    )

    config = {
        "corpus": {"path": str(work / "data" / "corpus.jsonl"),
                   "qa_path": str(work / "data" / "qa.jsonl")},
        "retriever": {"kind": "sparse", "k": 10},
        "reranker": {"kind": "jaccard", "k": 5},
        "generation": {"strategy": "simple", "ordering": "inverted",
                       "llm": {"kind": "stub"}},
        "judge": {"llm": {"kind": "fixed-judge"}, "include_gold": True},
        "grid": {"k_retrieve": [5, 10], "k_rerank": [3, 5],
                 "strategies": ["simple", "instructrag"],
                 "orderings": ["inverted"]},
    }
    config_path = work / "config.json"
    config_path.write_text(json.dumps(config, indent=2))

    out = work / "grid"
    rc = ragbench_main(["grid", "--grid", str(config_path),
                        "--dataset", str(work / "data" / "qa.jsonl"),
                        "--out", str(out)])
    if rc != 0:
        sys.exit(rc)
    print()
    print((out / "report.md").read_text())
    print(f"full outputs in {out}/")


if __name__ == "__main__":
    main()
