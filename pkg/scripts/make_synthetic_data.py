#!/usr/bin/env python3
"""Generate a synthetic corpus.jsonl + qa.jsonl pair for offline experiments.

Each document gets a unique topic token so that gold passages are always
retrievable; multi-hop items reference two documents.
"""

import argparse
import json
import random
from pathlib import Path

TOPICS = [
    "astronomy", "pottery", "sailing", "fermentation", "orienteering",
    "beekeeping", "calligraphy", "geology", "falconry", "weaving",
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", type=Path, default=Path("data"))
    parser.add_argument("--n-docs", type=int, default=40)
    parser.add_argument("--n-single", type=int, default=10)
    parser.add_argument("--n-multi", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)

    docs = []
    for i in range(args.n_docs):
        topic = TOPICS[i % len(TOPICS)]
        filler = " ".join(rng.choices(TOPICS, k=6))
        docs.append({
            "id": f"doc{i:04d}",
            "text": f"Notes on {topic}, entry marker{i:04d}. Background: {filler}.",
        })
    with open(args.out_dir / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc) + "\n")

    qa = []
    singles = rng.sample(docs, args.n_single)
    for j, doc in enumerate(singles):
        marker = doc["text"].split("marker")[1].split(".")[0]
        qa.append({
            "id": f"single{j:03d}",
            "question": f"What do the notes with marker{marker} say?",
            "gold_answer": doc["text"],
            "gold_doc_ids": [doc["id"]],
            "hop": "single",
        })
    for j in range(args.n_multi):
        a, b = rng.sample(docs, 2)
        ma = a["text"].split("marker")[1].split(".")[0]
        mb = b["text"].split("marker")[1].split(".")[0]
        qa.append({
            "id": f"multi{j:03d}",
            "question": f"Compare the entries marker{ma} and marker{mb}.",
            "gold_answer": a["text"] + " " + b["text"],
            "gold_doc_ids": [a["id"], b["id"]],
            "hop": "multi",
        })
    with open(args.out_dir / "qa.jsonl", "w", encoding="utf-8") as fh:
        for item in qa:
            fh.write(json.dumps(item) + "\n")

    print(f"wrote {len(docs)} docs and {len(qa)} QA items to {args.out_dir}/")


if __name__ == "__main__":
    main()
