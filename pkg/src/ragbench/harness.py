"""Experiment grid execution, metric aggregation and report emission.

One grid cell = (retriever, k_retrieve, reranker, k_rerank, strategy,
ordering). Per QA item the pipeline runs retrieve -> rerank -> assemble
-> generate -> judge; stage failures are recorded in the run record
instead of aborting the grid. Judge errors are excluded from score means
(and counted) rather than scored as 0.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import CorpusStore
from .dense import DenseIndex, EmbeddingProvider, dense_retrieve
from .generation import (
    DEFAULT_PASSAGE_CAP,
    GenerationTrace,
    IterConfig,
    TemplateSet,
    assemble_context,
    generate_astuterag,
    generate_instructrag,
    generate_iterdrag,
    generate_simple,
    generate_trustrag,
)
from .judge import JudgeRequest, Judgment, judge_answer
from .llm import LLMClient, LLMParams
from .models import QAItem, RetrievedPassage
from .rerank import RelevanceScorer, remaining_gold_fraction, rerank
from .sparse import SparseIndex, sparse_retrieve

RECORD_CSV_COLUMNS = [
    "config_id", "qa_id", "hop", "gold_recalled", "remaining_gold_fraction",
    "correctness", "faithfulness", "retrieve_ms", "rerank_ms", "generate_ms",
    "judge_ms", "llm_calls", "flags",
]
TIMING_COLUMNS = ("retrieve_ms", "rerank_ms", "generate_ms", "judge_ms")
HOPS = ("all", "single", "multi")


@dataclass(frozen=True)
class ExperimentConfig:
    retriever: str = "sparse"  # "sparse" | "dense"
    k_retrieve: int = 50
    reranker: str = "none"  # "none" | "scorer"
    k_rerank: int = 10
    strategy: str = "simple"
    ordering: str = "standard"  # "standard" | "inverted"
    iter: IterConfig = field(default_factory=IterConfig)
    passage_cap: int = DEFAULT_PASSAGE_CAP
    judge_include_gold: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.retriever not in ("sparse", "dense"):
            raise ValueError(f"unknown retriever {self.retriever!r}")
        if self.reranker not in ("none", "scorer"):
            raise ValueError(f"unknown reranker {self.reranker!r}")
        if self.ordering not in ("standard", "inverted"):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.k_retrieve < 1:
            raise ValueError("k_retrieve must be >= 1")
        if self.reranker == "scorer" and not 1 <= self.k_rerank <= self.k_retrieve:
            raise ValueError("k_rerank must be in [1, k_retrieve]")

    @property
    def config_id(self) -> str:
        parts = [f"{self.retriever}@{self.k_retrieve}"]
        if self.reranker == "scorer":
            parts.append(f"rerank@{self.k_rerank}")
        parts.append(self.strategy)
        parts.append(self.ordering)
        return "+".join(parts)


@dataclass
class PipelineDeps:
    corpus: CorpusStore
    sparse_index: SparseIndex | None = None
    dense_index: DenseIndex | None = None
    embedder: EmbeddingProvider | None = None
    scorer: RelevanceScorer | None = None
    llm: LLMClient | None = None
    judge_llm: LLMClient | None = None
    llm_params: LLMParams = field(default_factory=LLMParams)
    judge_params: LLMParams = field(default_factory=LLMParams)
    templates: TemplateSet | None = None


@dataclass
class RunRecord:
    config_id: str
    qa_id: str
    hop: str
    retrieved_ids: list[str] = field(default_factory=list)
    reranked_ids: list[str] = field(default_factory=list)
    gold_recalled: bool = False
    remaining_gold_fraction: float = 0.0
    trace: GenerationTrace | None = None
    judgment: Judgment | None = None
    error: str | None = None
    judge_error: str | None = None
    timings_ms: dict[str, float] = field(default_factory=dict)
    llm_calls: int = 0
    flags: list[str] = field(default_factory=list)


@dataclass
class RunReport:
    config_id: str
    n_records: int
    n_valid: int
    n_judge_errors: int
    n_errors: int
    mean_correctness: dict[str, float | None]
    mean_faithfulness: dict[str, float | None]
    correctness_buckets: dict[str, dict[int, float]]
    faithfulness_buckets: dict[str, dict[int, float]]
    gold_recall_rate: dict[str, float | None]
    latency_ms: dict[str, dict[str, float]]
    flag_counts: dict[str, int]


def gold_recalled(qa: QAItem, passages: Sequence[RetrievedPassage]) -> bool:
    """True iff every gold document appears among the passages."""
    present = {p.doc_id for p in passages}
    return qa.gold_doc_ids <= present


def _retrieve(cfg: ExperimentConfig, deps: PipelineDeps, query: str,
              k: int) -> list[RetrievedPassage]:
    if cfg.retriever == "sparse":
        if deps.sparse_index is None:
            raise ValueError("config uses sparse retriever but no sparse index provided")
        return sparse_retrieve(deps.sparse_index, query, k)
    if deps.dense_index is None or deps.embedder is None:
        raise ValueError("config uses dense retriever but no dense index/embedder provided")
    return dense_retrieve(deps.dense_index, deps.embedder.embed(query), k)


def run_single(cfg: ExperimentConfig, qa: QAItem, deps: PipelineDeps) -> RunRecord:
    record = RunRecord(config_id=cfg.config_id, qa_id=qa.id, hop=qa.hop)

    try:
        t0 = time.perf_counter()
        retrieved = _retrieve(cfg, deps, qa.question, cfg.k_retrieve)
        record.timings_ms["retrieve_ms"] = (time.perf_counter() - t0) * 1000.0
    except Exception as exc:
        record.error = f"retrieve: {exc}"
        return record
    record.retrieved_ids = [p.doc_id for p in retrieved]
    record.gold_recalled = gold_recalled(qa, retrieved)

    try:
        t0 = time.perf_counter()
        if cfg.reranker == "scorer":
            if deps.scorer is None:
                raise ValueError("config uses scorer reranker but no scorer provided")
            reranked = rerank(deps.scorer, qa.question, retrieved, cfg.k_rerank, deps.corpus)
        else:
            reranked = retrieved[: min(cfg.k_retrieve, cfg.passage_cap)]
        record.timings_ms["rerank_ms"] = (time.perf_counter() - t0) * 1000.0
    except Exception as exc:
        record.error = f"rerank: {exc}"
        return record
    record.reranked_ids = [p.doc_id for p in reranked]
    record.remaining_gold_fraction = remaining_gold_fraction(qa, reranked)

    try:
        if deps.llm is None:
            raise ValueError("no generation LLM provided")
        t0 = time.perf_counter()
        if cfg.strategy == "iterdrag":
            trace = generate_iterdrag(
                deps.llm,
                lambda q, k: _retrieve(cfg, deps, q, k),
                lambda q, ps, k: (
                    rerank(deps.scorer, q, ps, k, deps.corpus)
                    if cfg.reranker == "scorer" and deps.scorer is not None
                    else ps[:k]
                ),
                qa.question,
                cfg.iter,
                params=deps.llm_params,
                templates=deps.templates,
                corpus=deps.corpus,
                passage_cap=cfg.passage_cap,
                qa_id=qa.id,
            )
            judge_passages = [
                deps.corpus[d].text for d in trace.passages_used[: cfg.passage_cap]
            ]
        else:
            ctx = assemble_context(reranked, deps.corpus, cfg.ordering, cfg.passage_cap)
            fn = {
                "simple": generate_simple,
                "trustrag": generate_trustrag,
                "instructrag": generate_instructrag,
                "astuterag": generate_astuterag,
            }[cfg.strategy]
            trace = fn(deps.llm, qa.question, ctx, params=deps.llm_params,
                       templates=deps.templates, qa_id=qa.id)
            judge_passages = [text for _, text in ctx.entries]
        record.timings_ms["generate_ms"] = (time.perf_counter() - t0) * 1000.0
    except Exception as exc:
        record.error = f"generate: {exc}"
        record.trace = getattr(exc, "trace", None)
        return record
    record.trace = trace
    record.llm_calls = trace.llm_calls
    record.flags = list(trace.flags)

    if deps.judge_llm is None:
        return record
    try:
        t0 = time.perf_counter()
        gold_text = (
            "\n\n".join(deps.corpus[d].text for d in sorted(qa.gold_doc_ids))
            if cfg.judge_include_gold
            else None
        )
        req = JudgeRequest(
            question=qa.question,
            generated_answer=trace.final_answer,
            gold_answer=qa.gold_answer if cfg.judge_include_gold else None,
            gold_document=gold_text,
            retrieved_passages=tuple(judge_passages),
        )
        record.judgment = judge_answer(deps.judge_llm, req, params=deps.judge_params,
                                       templates=deps.templates)
        record.timings_ms["judge_ms"] = (time.perf_counter() - t0) * 1000.0
    except Exception as exc:
        record.judge_error = str(exc)
        record.flags.append("judge_error")
    return record


def run_grid(
    grid: Sequence[ExperimentConfig],
    dataset: Sequence[QAItem],
    deps: PipelineDeps,
) -> tuple[list[RunRecord], dict[str, RunReport]]:
    """Run every config against every item; full Cartesian product."""
    if not grid or not dataset:
        raise ValueError("grid and dataset must be non-empty")
    records: list[RunRecord] = []
    for cfg in grid:
        for qa in dataset:
            records.append(run_single(cfg, qa, deps))
    records.sort(key=lambda r: (r.config_id, r.qa_id))
    reports = {
        cfg.config_id: aggregate([r for r in records if r.config_id == cfg.config_id])
        for cfg in grid
    }
    return records, reports


def _percentiles(samples: Sequence[float]) -> dict[str, float]:
    arr = np.asarray(samples, dtype=np.float64)
    return {
        "p50": float(np.percentile(arr, 50)),
        "p90": float(np.percentile(arr, 90)),
        "p99": float(np.percentile(arr, 99)),
        "mean": float(arr.mean()),
    }


def aggregate(records: Sequence[RunRecord]) -> RunReport:
    if not records:
        raise ValueError("cannot aggregate zero records")
    config_id = records[0].config_id
    by_hop = {
        "all": list(records),
        "single": [r for r in records if r.hop == "single"],
        "multi": [r for r in records if r.hop == "multi"],
    }
    mean_c: dict[str, float | None] = {}
    mean_f: dict[str, float | None] = {}
    buckets_c: dict[str, dict[int, float]] = {}
    buckets_f: dict[str, dict[int, float]] = {}
    recall: dict[str, float | None] = {}
    for hop, subset in by_hop.items():
        valid = [r.judgment for r in subset if r.judgment is not None]
        if valid:
            mean_c[hop] = sum(j.correctness for j in valid) / len(valid)
            mean_f[hop] = sum(j.faithfulness for j in valid) / len(valid)
            buckets_c[hop] = {
                v: 100.0 * sum(1 for j in valid if j.correctness == v) / len(valid)
                for v in (-1, 0, 1, 2)
            }
            buckets_f[hop] = {
                v: 100.0 * sum(1 for j in valid if j.faithfulness == v) / len(valid)
                for v in (-1, 0, 1)
            }
        else:
            mean_c[hop] = None
            mean_f[hop] = None
            buckets_c[hop] = {}
            buckets_f[hop] = {}
        recall[hop] = (
            sum(1 for r in subset if r.gold_recalled) / len(subset) if subset else None
        )
    latency: dict[str, dict[str, float]] = {}
    for stage in TIMING_COLUMNS:
        samples = [r.timings_ms[stage] for r in records if stage in r.timings_ms]
        if samples:
            latency[stage] = _percentiles(samples)
    flag_counts: dict[str, int] = {}
    for r in records:
        for f in r.flags:
            flag_counts[f] = flag_counts.get(f, 0) + 1
    return RunReport(
        config_id=config_id,
        n_records=len(records),
        n_valid=sum(1 for r in records if r.judgment is not None),
        n_judge_errors=sum(1 for r in records if r.judge_error is not None),
        n_errors=sum(1 for r in records if r.error is not None),
        mean_correctness=mean_c,
        mean_faithfulness=mean_f,
        correctness_buckets=buckets_c,
        faithfulness_buckets=buckets_f,
        gold_recall_rate=recall,
        latency_ms=latency,
        flag_counts=flag_counts,
    )


# --- records CSV -----------------------------------------------------------

def write_records_csv(records: Sequence[RunRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.config_id,
                r.qa_id,
                r.hop,
                "true" if r.gold_recalled else "false",
                repr(r.remaining_gold_fraction),
                "" if r.judgment is None else r.judgment.correctness,
                "" if r.judgment is None else r.judgment.faithfulness,
                *(f"{r.timings_ms.get(c, 0.0):.3f}" for c in TIMING_COLUMNS),
                r.llm_calls,
                "|".join(r.flags),
            ])


def read_records_csv(path: str | Path) -> list[RunRecord]:
    records: list[RunRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected CSV columns {reader.fieldnames}")
        for row in reader:
            judgment = None
            judge_error = None
            if row["correctness"] != "":
                judgment = Judgment(
                    correctness=int(row["correctness"]),
                    faithfulness=int(row["faithfulness"]),
                    raw="",
                )
            elif "judge_error" in row["flags"].split("|"):
                judge_error = "judge_error"
            records.append(RunRecord(
                config_id=row["config_id"],
                qa_id=row["qa_id"],
                hop=row["hop"],
                gold_recalled=row["gold_recalled"] == "true",
                remaining_gold_fraction=float(row["remaining_gold_fraction"]),
                judgment=judgment,
                judge_error=judge_error,
                timings_ms={c: float(row[c]) for c in TIMING_COLUMNS},
                llm_calls=int(row["llm_calls"]),
                flags=[f for f in row["flags"].split("|") if f],
            ))
    return records


# --- latency benchmarking --------------------------------------------------

@dataclass
class LatencyReport:
    samples: dict[int, list[float]]  # k -> wall-time seconds per call
    stats: dict[int, dict[str, float]]


def bench_retrieval(
    retrieve_fn: Callable[[str, int], list[RetrievedPassage]],
    queries: Sequence[str],
    ks: Sequence[int],
    repetitions: int,
) -> LatencyReport:
    """Measure per-k retrieval wall time. One warm-up pass per k is
    executed and excluded from the samples."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    samples: dict[int, list[float]] = {}
    for k in ks:
        for q in queries:
            retrieve_fn(q, k)  # warm-up, not recorded
        times: list[float] = []
        for _ in range(repetitions):
            for q in queries:
                t0 = time.perf_counter()
                retrieve_fn(q, k)
                times.append(time.perf_counter() - t0)
        samples[k] = times
    return LatencyReport(
        samples=samples, stats={k: _percentiles(v) for k, v in samples.items()}
    )


# --- report emission -------------------------------------------------------

_REPORT_COLUMNS = (
    ["config_id", "n_records", "n_valid", "n_judge_errors", "n_errors"]
    + [f"mean_correctness_{h}" for h in HOPS]
    + [f"mean_faithfulness_{h}" for h in HOPS]
    + [f"corr_{h}_{v}" for h in HOPS for v in (-1, 0, 1, 2)]
    + [f"faith_{h}_{v}" for h in HOPS for v in (-1, 0, 1)]
    + [f"gold_recall_{h}" for h in HOPS]
    + [f"{stage}_{p}" for stage in TIMING_COLUMNS for p in ("p50", "p90", "p99")]
)


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def emit_report(
    reports: dict[str, RunReport],
    fmt: str,
    path: str | Path,
    configs: dict[str, ExperimentConfig] | None = None,
) -> Path:
    """Write per-config aggregates as csv, markdown, or plotdata.

    The CSV keeps every score bucket; the markdown view mirrors the
    display filter of the summary table (correctness {1, 2} and
    faithfulness {0, 1} per hop type). plotdata emits (k_retrieve,
    gold-recall) pairs sorted by k and needs ``configs``.
    """
    path = Path(path)
    ordered = [reports[cid] for cid in sorted(reports)]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(_REPORT_COLUMNS)
        for rep in ordered:
            row: list[str] = [rep.config_id, str(rep.n_records), str(rep.n_valid),
                              str(rep.n_judge_errors), str(rep.n_errors)]
            row += [_fmt(rep.mean_correctness[h]) for h in HOPS]
            row += [_fmt(rep.mean_faithfulness[h]) for h in HOPS]
            row += [_fmt(rep.correctness_buckets[h].get(v)) for h in HOPS for v in (-1, 0, 1, 2)]
            row += [_fmt(rep.faithfulness_buckets[h].get(v)) for h in HOPS for v in (-1, 0, 1)]
            row += [_fmt(rep.gold_recall_rate[h]) for h in HOPS]
            for stage in TIMING_COLUMNS:
                stats = rep.latency_ms.get(stage)
                row += [_fmt(stats[p]) if stats else "" for p in ("p50", "p90", "p99")]
            writer.writerow(row)
        path.write_text(buf.getvalue(), encoding="utf-8")
    elif fmt == "markdown":
        lines = [
            "| Config | SH Corr {1} | SH Corr {2} | SH Faith {0} | SH Faith {1} "
            "| MH Corr {1} | MH Corr {2} | MH Faith {0} | MH Faith {1} |",
            "|---|---|---|---|---|---|---|---|---|",
        ]
        for rep in ordered:
            cells = []
            for hop in ("single", "multi"):
                for metric, vals in (
                    (rep.correctness_buckets[hop], (1, 2)),
                    (rep.faithfulness_buckets[hop], (0, 1)),
                ):
                    for v in vals:
                        pct = metric.get(v)
                        cells.append("-" if pct is None else f"{pct:.1f}")
            lines.append("| " + " | ".join([rep.config_id, *cells]) + " |")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt == "plotdata":
        if configs is None:
            raise ValueError("plotdata emission needs the config map for k values")
        rows = sorted(
            ((configs[rep.config_id].k_retrieve, rep) for rep in ordered
             if rep.config_id in configs),
            key=lambda pair: (pair[0], pair[1].config_id),
        )
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["k", "recall_single", "recall_multi", "recall_all"])
        for k, rep in rows:
            writer.writerow([
                k,
                _fmt(rep.gold_recall_rate["single"]),
                _fmt(rep.gold_recall_rate["multi"]),
                _fmt(rep.gold_recall_rate["all"]),
            ])
        path.write_text(buf.getvalue(), encoding="utf-8")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def save_run_details(records: Sequence[RunRecord], path: str | Path) -> None:
    """Full per-record detail (answers, traces) as JSONL, next to the CSV.

    The fixed-column records CSV has no room for answer text; re-judging
    (`ragbench judge`) reads this file instead.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {
                "config_id": r.config_id,
                "qa_id": r.qa_id,
                "hop": r.hop,
                "retrieved_ids": r.retrieved_ids,
                "reranked_ids": r.reranked_ids,
                "error": r.error,
                "judge_error": r.judge_error,
                "final_answer": r.trace.final_answer if r.trace else None,
                "passages_used": r.trace.passages_used if r.trace else [],
                "sub_queries": r.trace.sub_queries if r.trace else [],
                "flags": r.flags,
                "judgment": (
                    {"correctness": r.judgment.correctness,
                     "faithfulness": r.judgment.faithfulness,
                     "raw": r.judgment.raw}
                    if r.judgment else None
                ),
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
