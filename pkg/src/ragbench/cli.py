"""Command-line entry points.

Subcommands: `index build`, `retrieve`, `run`, `grid`, `bench`, `judge`.
Experiment configuration is a JSON file with sections
{corpus, retriever, reranker, generation, judge, grid}; API keys are
only ever read from environment variables named in the config.

Offline provider kinds ("hash" embedder, "jaccard" scorer, "stub" LLM
and "fixed" judge) let the whole pipeline run without any endpoint,
which is how the demo scripts and smoke runs work.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import CorpusStore, load_corpus, load_qa_dataset
from .dense import DenseIndex, HashingEmbedder, HttpEmbeddingClient, build_dense_index, dense_retrieve
from .generation import IterConfig, TemplateSet, TERMINATION_TOKEN
from .harness import (
    ExperimentConfig,
    PipelineDeps,
    emit_report,
    bench_retrieval,
    run_grid,
    save_run_details,
    write_records_csv,
    aggregate,
    RunRecord,
)
from .judge import JudgeRequest, judge_answer
from .llm import HttpChatClient, LLMParams, MockLLM
from .rerank import HttpCrossEncoderScorer, JaccardScorer
from .sparse import build_sparse_index, load_sparse_index, save_sparse_index, sparse_retrieve


def _stub_rule(system: str, user: str) -> str:
    # Deterministic offline stand-in for a chat model: enough structure
    # for every strategy's protocol to complete.
    if "JSON array" in user:
        return "[1]"
    if TERMINATION_TOKEN in user:
        return TERMINATION_TOKEN
    if "RATIONALE:" in user:
        return "RATIONALE: using the provided passages. ANSWER: " + _first_passage_line(user)
    return _first_passage_line(user)


def _first_passage_line(user: str) -> str:
    for line in user.splitlines():
        if line.startswith("Passage 1"):
            return line.split(":", 1)[-1].strip()[:200] or "no answer"
    return "no answer"


def _build_llm(section: dict):
    kind = section.get("kind", "stub")
    if kind == "stub":
        return MockLLM(rule=_stub_rule)
    if kind == "fixed-judge":
        return MockLLM(rule=lambda s, u: '{"correctness": 2, "faithfulness": 1}')
    if kind == "http":
        return HttpChatClient(
            base_url=section["url"],
            api_key_env=section.get("api_key_env", "RAGBENCH_LLM_API_KEY"),
        )
    raise ValueError(f"unknown llm kind {kind!r}")


def _build_embedder(section: dict):
    kind = section.get("kind", "hash")
    if kind == "hash":
        return HashingEmbedder(dim=int(section.get("dim", 32)))
    if kind == "http":
        return HttpEmbeddingClient(
            base_url=section["url"],
            model=section.get("model", ""),
            dim=int(section["dim"]),
            api_key_env=section.get("api_key_env", "RAGBENCH_EMBED_API_KEY"),
        )
    raise ValueError(f"unknown embedder kind {kind!r}")


def _build_scorer(section: dict):
    kind = section.get("kind", "jaccard")
    if kind == "jaccard":
        return JaccardScorer()
    if kind == "http":
        return HttpCrossEncoderScorer(
            url=section["url"],
            api_key_env=section.get("api_key_env", "RAGBENCH_RERANK_API_KEY"),
        )
    raise ValueError(f"unknown scorer kind {kind!r}")


def _deps_from_config(conf: dict, corpus: CorpusStore) -> tuple[PipelineDeps, dict]:
    retr = conf.get("retriever", {})
    rer = conf.get("reranker", {})
    gen = conf.get("generation", {})
    jud = conf.get("judge", {})

    deps = PipelineDeps(corpus=corpus)
    if retr.get("kind", "sparse") == "sparse":
        deps.sparse_index = build_sparse_index(corpus)
    else:
        deps.embedder = _build_embedder(retr.get("embedder", {}))
        deps.dense_index = build_dense_index(corpus, deps.embedder)
    if rer.get("kind", "none") != "none":
        deps.scorer = _build_scorer(rer)
    deps.llm = _build_llm(gen.get("llm", {}))
    deps.llm_params = LLMParams(
        temperature=float(gen.get("temperature", 0.1)),
        max_tokens=int(gen.get("max_tokens", 1024)),
        model=gen.get("model", ""),
    )
    judge_llm_section = jud.get("llm", {"kind": "fixed-judge"})
    deps.judge_llm = _build_llm(judge_llm_section)
    deps.judge_params = LLMParams(
        temperature=float(jud.get("temperature", 0.0)),
        max_tokens=int(jud.get("max_tokens", 256)),
        model=jud.get("model", ""),
    )
    if gen.get("template_dir"):
        deps.templates = TemplateSet(gen["template_dir"])
    return deps, conf


def _experiment_config(conf: dict, k_retrieve: int | None = None,
                       k_rerank: int | None = None, strategy: str | None = None,
                       ordering: str | None = None) -> ExperimentConfig:
    retr = conf.get("retriever", {})
    rer = conf.get("reranker", {})
    gen = conf.get("generation", {})
    iter_conf = gen.get("iter", {})
    return ExperimentConfig(
        retriever=retr.get("kind", "sparse"),
        k_retrieve=k_retrieve if k_retrieve is not None else int(retr.get("k", 50)),
        reranker="none" if rer.get("kind", "none") == "none" else "scorer",
        k_rerank=k_rerank if k_rerank is not None else int(rer.get("k", 10)),
        strategy=strategy if strategy is not None else gen.get("strategy", "simple"),
        ordering=ordering if ordering is not None else gen.get("ordering", "standard"),
        iter=IterConfig(**iter_conf) if iter_conf else IterConfig(),
        judge_include_gold=bool(conf.get("judge", {}).get("include_gold", True)),
        seed=int(conf.get("seed", 0)),
    )


def _cmd_index_build(args) -> int:
    corpus = load_corpus(args.corpus)
    if args.kind == "sparse":
        index = build_sparse_index(corpus)
        if args.out:
            save_sparse_index(index, args.out)
        print(f"sparse index: {index.doc_count} docs, {len(index.postings)} terms")
    else:
        embedder = HashingEmbedder(dim=args.dim)
        index = build_dense_index(corpus, embedder)
        print(f"dense index: {index.doc_count} docs, dim {index.dim}")
        if args.out:
            print("note: dense index persistence not supported; rebuild from corpus",
                  file=sys.stderr)
    return 0


def _cmd_retrieve(args) -> int:
    corpus = load_corpus(args.corpus)
    if args.kind == "sparse":
        if args.index:
            index = load_sparse_index(args.index)
        else:
            index = build_sparse_index(corpus)
        results = sparse_retrieve(index, args.query, args.k)
    else:
        embedder = HashingEmbedder(dim=args.dim)
        index = build_dense_index(corpus, embedder)
        results = dense_retrieve(index, embedder.embed(args.query), args.k)
    for p in results:
        print(f"{p.rank}\t{p.doc_id}\t{p.score:.6f}")
    return 0


def _load_run_inputs(config_path: str, dataset_path: str):
    conf = json.loads(Path(config_path).read_text(encoding="utf-8"))
    corpus = load_corpus(conf["corpus"]["path"])
    dataset = load_qa_dataset(dataset_path, corpus)
    deps, conf = _deps_from_config(conf, corpus)
    return conf, corpus, dataset, deps


def _write_outputs(records, reports, configs, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out_dir / "records.csv")
    save_run_details(records, out_dir / "runs.jsonl")
    emit_report(reports, "csv", out_dir / "report.csv", configs)
    emit_report(reports, "markdown", out_dir / "report.md", configs)
    emit_report(reports, "plotdata", out_dir / "recall_vs_k.csv", configs)
    print(f"wrote {len(records)} records for {len(reports)} configs to {out_dir}")


def _cmd_run(args) -> int:
    conf, _, dataset, deps = _load_run_inputs(args.config, args.dataset)
    cfg = _experiment_config(conf)
    records, reports = run_grid([cfg], dataset, deps)
    _write_outputs(records, reports, {cfg.config_id: cfg}, Path(args.out))
    return 0


def _cmd_grid(args) -> int:
    conf, _, dataset, deps = _load_run_inputs(args.grid, args.dataset)
    grid_sec = conf.get("grid", {})
    ks_retrieve = grid_sec.get("k_retrieve") or [None]
    ks_rerank = grid_sec.get("k_rerank") or [None]
    strategies = grid_sec.get("strategies") or [None]
    orderings = grid_sec.get("orderings") or [None]
    grid = [
        _experiment_config(conf, kr, kk, st, od)
        for kr in ks_retrieve
        for kk in ks_rerank
        for st in strategies
        for od in orderings
    ]
    records, reports = run_grid(grid, dataset, deps)
    _write_outputs(records, reports, {c.config_id: c for c in grid}, Path(args.out))
    return 0


def _cmd_bench(args) -> int:
    corpus = load_corpus(args.corpus)
    ks = [int(k) for k in args.ks.split(",")]
    if args.queries_file:
        queries = [q for q in Path(args.queries_file).read_text(encoding="utf-8").splitlines() if q.strip()]
    else:
        queries = [doc.text.split("\n")[0][:80] for doc in list(corpus)[:5]]
    if args.kind == "sparse":
        index = build_sparse_index(corpus)
        fn = lambda q, k: sparse_retrieve(index, q, k)
    else:
        embedder = HashingEmbedder(dim=args.dim)
        dindex = build_dense_index(corpus, embedder)
        fn = lambda q, k: dense_retrieve(dindex, embedder.embed(q), k)
    report = bench_retrieval(fn, queries, ks, args.reps)
    print("k\tmean_ms\tp50_ms\tp90_ms\tp99_ms\tn")
    for k in ks:
        s = report.stats[k]
        print(f"{k}\t{s['mean'] * 1e3:.3f}\t{s['p50'] * 1e3:.3f}\t"
              f"{s['p90'] * 1e3:.3f}\t{s['p99'] * 1e3:.3f}\t{len(report.samples[k])}")
    return 0


def _cmd_judge(args) -> int:
    conf = json.loads(Path(args.config).read_text(encoding="utf-8"))
    corpus = load_corpus(conf["corpus"]["path"])
    dataset = {qa.id: qa for qa in load_qa_dataset(conf["corpus"]["qa_path"], corpus)}
    deps, _ = _deps_from_config(conf, corpus)
    details_path = Path(args.records).with_name("runs.jsonl")
    if not details_path.exists():
        print(f"error: {details_path} not found next to {args.records}; "
              "re-judging needs the answer text stored there", file=sys.stderr)
        return 1
    include_gold = bool(conf.get("judge", {}).get("include_gold", True))
    records: list[RunRecord] = []
    with open(details_path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            qa = dataset.get(obj["qa_id"])
            if qa is None or not obj.get("final_answer"):
                continue
            record = RunRecord(config_id=obj["config_id"], qa_id=obj["qa_id"], hop=obj["hop"])
            try:
                req = JudgeRequest(
                    question=qa.question,
                    generated_answer=obj["final_answer"],
                    gold_answer=qa.gold_answer if include_gold else None,
                    gold_document=(
                        "\n\n".join(corpus[d].text for d in sorted(qa.gold_doc_ids))
                        if include_gold else None
                    ),
                    retrieved_passages=tuple(
                        corpus[d].text for d in obj.get("passages_used", []) if d in corpus
                    ),
                )
                record.judgment = judge_answer(deps.judge_llm, req, params=deps.judge_params,
                                               templates=deps.templates)
            except Exception as exc:
                record.judge_error = str(exc)
                record.flags.append("judge_error")
            records.append(record)
    if not records:
        print("no judgeable records found", file=sys.stderr)
        return 1
    out = Path(args.out or Path(args.records).with_name("rejudged.csv"))
    write_records_csv(records, out)
    by_config = sorted({r.config_id for r in records})
    for cid in by_config:
        rep = aggregate([r for r in records if r.config_id == cid])
        print(f"{cid}: mean correctness {rep.mean_correctness['all']}, "
              f"mean faithfulness {rep.mean_faithfulness['all']}")
    print(f"wrote {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ragbench",
                                     description="Desk-scale RAG experimentation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="index management")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)
    p_build = index_sub.add_parser("build", help="build an index from a corpus")
    p_build.add_argument("--corpus", required=True)
    p_build.add_argument("--kind", choices=["sparse", "dense"], required=True)
    p_build.add_argument("--out")
    p_build.add_argument("--dim", type=int, default=32)
    p_build.set_defaults(fn=_cmd_index_build)

    p_ret = sub.add_parser("retrieve", help="run one query against an index")
    p_ret.add_argument("--query", required=True)
    p_ret.add_argument("--k", type=int, required=True)
    p_ret.add_argument("--kind", choices=["sparse", "dense"], required=True)
    p_ret.add_argument("--corpus", required=True)
    p_ret.add_argument("--index")
    p_ret.add_argument("--dim", type=int, default=32)
    p_ret.set_defaults(fn=_cmd_retrieve)

    p_run = sub.add_parser("run", help="run one experiment config over a dataset")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--dataset", required=True)
    p_run.add_argument("--out", default="out")
    p_run.set_defaults(fn=_cmd_run)

    p_grid = sub.add_parser("grid", help="run a cross-evaluation grid")
    p_grid.add_argument("--grid", required=True, help="config file with a grid section")
    p_grid.add_argument("--dataset", required=True)
    p_grid.add_argument("--out", required=True)
    p_grid.set_defaults(fn=_cmd_grid)

    p_bench = sub.add_parser("bench", help="latency-benchmark a retriever")
    p_bench.add_argument("--kind", choices=["sparse", "dense"], required=True)
    p_bench.add_argument("--corpus", required=True)
    p_bench.add_argument("--ks", required=True, help="comma-separated k values")
    p_bench.add_argument("--reps", type=int, default=3)
    p_bench.add_argument("--queries-file")
    p_bench.add_argument("--dim", type=int, default=32)
    p_bench.set_defaults(fn=_cmd_bench)

    p_judge = sub.add_parser("judge", help="re-judge existing answers")
    p_judge.add_argument("--records", required=True, help="records.csv from a previous run")
    p_judge.add_argument("--config", required=True)
    p_judge.add_argument("--out")
    p_judge.set_defaults(fn=_cmd_judge)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
