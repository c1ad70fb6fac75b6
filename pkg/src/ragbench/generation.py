"""Context assembly and the five answer-generation strategies.

Strategies: simple (single retrieval-augmented prompt), trustrag
(elicit internal knowledge, filter passages, answer), instructrag
(single rationale-then-answer prompt), astuterag (elicit, consolidate
with source tags, finalize), iterdrag (iterative sub-query
decomposition with per-iteration retrieval).

Prompt wording lives in versioned template files (templates/ in the
package by default, overridable per experiment). Structured
intermediate outputs are requested as JSON and parsed leniently; on
failure a documented fallback applies and is flagged in the trace.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from .corpus import CorpusStore
from .llm import LLMClient, LLMParams
from .models import RetrievedPassage

NO_PASSAGES_MARKER = "[no passages retrieved]"
TERMINATION_TOKEN = "NO_MORE_QUESTIONS"
DEFAULT_PASSAGE_CAP = 50

STRATEGIES = ("simple", "trustrag", "instructrag", "astuterag", "iterdrag")


class GenerationError(RuntimeError):
    def __init__(self, message: str, trace: "GenerationTrace | None" = None):
        super().__init__(message)
        self.trace = trace


class TemplateSet:
    """Loads prompt templates by name from a directory, caching contents."""

    def __init__(self, directory: str | Path | None = None):
        self._dir = Path(directory) if directory is not None else None
        self._cache: dict[str, str] = {}

    def raw(self, name: str) -> str:
        if name not in self._cache:
            if self._dir is not None:
                text = (self._dir / f"{name}.txt").read_text(encoding="utf-8")
            else:
                text = (resources.files("ragbench") / "templates" / f"{name}.txt").read_text(
                    encoding="utf-8"
                )
            self._cache[name] = text
        return self._cache[name]

    def render(self, name: str, **fields: str) -> str:
        return self.raw(name).format(**fields)


_DEFAULT_TEMPLATES = TemplateSet()


def default_templates() -> TemplateSet:
    return _DEFAULT_TEMPLATES


@dataclass(frozen=True)
class ContextBlock:
    entries: tuple[tuple[str, str], ...]  # (doc_id, text) in prompt order
    ordering: str  # "standard" | "inverted"
    passage_cap: int = DEFAULT_PASSAGE_CAP


@dataclass
class TraceStep:
    name: str
    prompt: str
    response: str


@dataclass
class GenerationTrace:
    qa_id: str
    strategy: str
    steps: list[TraceStep] = field(default_factory=list)
    sub_queries: list[tuple[str, str]] = field(default_factory=list)
    rationale: str = ""
    final_answer: str = ""
    passages_used: list[str] = field(default_factory=list)
    llm_calls: int = 0
    wall_time: float = 0.0
    flags: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class IterConfig:
    initial_k_retrieve: int = 200
    initial_k_rerank: int = 10
    iter_k_retrieve: int = 200
    iter_k_rerank: int = 4
    max_iterations: int = 5

    def __post_init__(self):
        for name in ("initial_k_retrieve", "initial_k_rerank", "iter_k_retrieve",
                     "iter_k_rerank", "max_iterations"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


Retriever = Callable[[str, int], list[RetrievedPassage]]
Reranker = Callable[[str, list[RetrievedPassage], int], list[RetrievedPassage]]


def assemble_context(
    passages: Sequence[RetrievedPassage],
    corpus: CorpusStore,
    ordering: str = "standard",
    passage_cap: int = DEFAULT_PASSAGE_CAP,
) -> ContextBlock:
    """Order passages for prompting.

    "inverted" puts the best-ranked passage last, immediately before the
    question. Truncation to passage_cap keeps the top ranks and happens
    before inversion.
    """
    if ordering not in ("standard", "inverted"):
        raise ValueError(f"unknown ordering {ordering!r}")
    ranked = sorted(passages, key=lambda p: p.rank)[:passage_cap]
    entries = []
    for p in ranked:
        doc = corpus.get(p.doc_id)
        if doc is None:
            raise KeyError(f"dangling doc id {p.doc_id!r} in context assembly")
        entries.append((p.doc_id, doc.text))
    if ordering == "inverted":
        entries.reverse()
    return ContextBlock(entries=tuple(entries), ordering=ordering, passage_cap=passage_cap)


def format_passages(entries: Sequence[tuple[str, str]], source: str | None = None) -> str:
    if not entries:
        return NO_PASSAGES_MARKER
    tag = f", source: {source}" if source else ""
    return "\n\n".join(
        f"Passage {i} [{doc_id}{tag}]: {text}" for i, (doc_id, text) in enumerate(entries, 1)
    )


def _strip_fences(text: str) -> str:
    return re.sub(r"```[a-zA-Z]*", "", text).replace("```", "")


def parse_index_list(text: str) -> list[int] | None:
    """Leniently extract the first JSON array of integers from LLM output."""
    cleaned = _strip_fences(text)
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\[", cleaned):
        try:
            value, _ = decoder.raw_decode(cleaned, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(value, list) and all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            return value
    return None


def _call(llm: LLMClient, trace: GenerationTrace, name: str, system: str, user: str,
          params: LLMParams) -> str:
    try:
        response = llm.complete(system, user, params)
    except Exception as exc:
        raise GenerationError(f"LLM call {name!r} failed: {exc}", trace=trace) from exc
    trace.steps.append(TraceStep(name=name, prompt=user, response=response))
    trace.llm_calls += 1
    return response


def generate_simple(
    llm: LLMClient,
    question: str,
    ctx: ContextBlock,
    params: LLMParams = LLMParams(),
    templates: TemplateSet | None = None,
    qa_id: str = "",
) -> GenerationTrace:
    templates = templates or default_templates()
    trace = GenerationTrace(qa_id=qa_id, strategy="simple")
    start = time.perf_counter()
    system = templates.raw("system")
    user = templates.render("simple", passages=format_passages(ctx.entries), question=question)
    trace.final_answer = _call(llm, trace, "answer", system, user, params)
    trace.passages_used = [doc_id for doc_id, _ in ctx.entries]
    trace.wall_time = time.perf_counter() - start
    return trace


def generate_trustrag(
    llm: LLMClient,
    question: str,
    ctx: ContextBlock,
    params: LLMParams = LLMParams(),
    templates: TemplateSet | None = None,
    qa_id: str = "",
) -> GenerationTrace:
    templates = templates or default_templates()
    trace = GenerationTrace(qa_id=qa_id, strategy="trustrag")
    start = time.perf_counter()
    system = templates.raw("system")

    elicit_user = templates.render("trustrag_elicit", question=question)
    internal = _call(llm, trace, "elicit", system, elicit_user, params)

    filter_user = templates.render(
        "trustrag_filter",
        question=question,
        internal_knowledge=internal,
        passages=format_passages(ctx.entries),
    )
    filter_resp = _call(llm, trace, "filter", system, filter_user, params)
    indices = parse_index_list(filter_resp)
    if indices is None:
        kept = list(ctx.entries)
        trace.flags.append("filter_parse_failed")
    else:
        kept = [ctx.entries[i - 1] for i in indices if 1 <= i <= len(ctx.entries)]

    answer_user = templates.render(
        "trustrag_answer", passages=format_passages(kept), question=question
    )
    trace.final_answer = _call(llm, trace, "answer", system, answer_user, params)
    trace.passages_used = [doc_id for doc_id, _ in kept]
    trace.wall_time = time.perf_counter() - start
    return trace


def generate_instructrag(
    llm: LLMClient,
    question: str,
    ctx: ContextBlock,
    params: LLMParams = LLMParams(),
    templates: TemplateSet | None = None,
    qa_id: str = "",
) -> GenerationTrace:
    """In-context variant: one composite rationale-then-answer prompt."""
    templates = templates or default_templates()
    trace = GenerationTrace(qa_id=qa_id, strategy="instructrag")
    start = time.perf_counter()
    system = templates.raw("system")
    user = templates.render(
        "instructrag", passages=format_passages(ctx.entries), question=question
    )
    response = _call(llm, trace, "rationale_and_answer", system, user, params)
    if "ANSWER:" in response:
        rationale, _, answer = response.partition("ANSWER:")
        trace.final_answer = answer.strip()
        trace.rationale = rationale.replace("RATIONALE:", "", 1).strip()
    else:
        trace.final_answer = response.strip()
        trace.flags.append("missing_answer_marker")
    trace.passages_used = [doc_id for doc_id, _ in ctx.entries]
    trace.wall_time = time.perf_counter() - start
    return trace


def generate_astuterag(
    llm: LLMClient,
    question: str,
    ctx: ContextBlock,
    params: LLMParams = LLMParams(),
    templates: TemplateSet | None = None,
    qa_id: str = "",
) -> GenerationTrace:
    templates = templates or default_templates()
    trace = GenerationTrace(qa_id=qa_id, strategy="astuterag")
    start = time.perf_counter()
    system = templates.raw("system")

    elicit_user = templates.render("astute_elicit", question=question)
    internal = _call(llm, trace, "elicit", system, elicit_user, params)

    tagged = []
    if internal.strip() and internal.strip() != "NONE":
        tagged.append(("internal-knowledge", internal, "internal"))
    for doc_id, text in ctx.entries:
        tagged.append((doc_id, text, "retrieved"))
    if tagged:
        blocks = "\n\n".join(
            f"Passage {i} [{pid}, source: {src}]: {text}"
            for i, (pid, text, src) in enumerate(tagged, 1)
        )
    else:
        blocks = NO_PASSAGES_MARKER
    consolidate_user = templates.render("astute_consolidate", passages=blocks, question=question)
    consolidated = _call(llm, trace, "consolidate", system, consolidate_user, params)

    finalize_user = templates.render(
        "astute_finalize", consolidated=consolidated, question=question
    )
    trace.final_answer = _call(llm, trace, "finalize", system, finalize_user, params)
    trace.passages_used = [doc_id for doc_id, _ in ctx.entries]
    trace.wall_time = time.perf_counter() - start
    return trace


def _format_subqueries(pairs: Sequence[tuple[str, str]]) -> str:
    if not pairs:
        return "(none yet)"
    return "\n".join(f"Q{i}: {q}\nA{i}: {a}" for i, (q, a) in enumerate(pairs, 1))


def generate_iterdrag(
    llm: LLMClient,
    retriever: Retriever,
    reranker: Reranker,
    question: str,
    cfg: IterConfig = IterConfig(),
    params: LLMParams = LLMParams(),
    templates: TemplateSet | None = None,
    corpus: CorpusStore | None = None,
    passage_cap: int = DEFAULT_PASSAGE_CAP,
    qa_id: str = "",
) -> GenerationTrace:
    """Iterative decomposition. Call protocol per run:

    1 initial sub-query proposal, then per accepted sub-query one answer
    call and one further proposal call, and a single final composition
    call. A proposal returning the termination token ends the loop; the
    iteration cap forces composition without a further proposal.
    Context ordering is always standard here.
    """
    if corpus is None:
        raise ValueError("generate_iterdrag requires the corpus for passage texts")
    templates = templates or default_templates()
    trace = GenerationTrace(qa_id=qa_id, strategy="iterdrag")
    start = time.perf_counter()
    system = templates.raw("system")

    initial = reranker(question, retriever(question, cfg.initial_k_retrieve),
                       cfg.initial_k_rerank)
    # Accumulated documents, deduplicated by id, first occurrence wins.
    accumulated: dict[str, str] = {}

    def _absorb(passages: Sequence[RetrievedPassage]) -> None:
        for p in sorted(passages, key=lambda x: x.rank):
            if p.doc_id not in accumulated:
                doc = corpus.get(p.doc_id)
                if doc is None:
                    raise GenerationError(f"dangling doc id {p.doc_id!r}", trace=trace)
                accumulated[p.doc_id] = doc.text

    _absorb(initial)

    for iteration in range(cfg.max_iterations):
        propose_user = templates.render(
            "iterdrag_subquery",
            question=question,
            passages=format_passages(list(accumulated.items())[:passage_cap]),
            subqueries=_format_subqueries(trace.sub_queries),
        )
        proposal = _call(llm, trace, f"propose_{iteration + 1}", system, propose_user, params)
        if TERMINATION_TOKEN in proposal:
            break
        sub_q = proposal.strip()
        sub_passages = reranker(sub_q, retriever(sub_q, cfg.iter_k_retrieve),
                                cfg.iter_k_rerank)
        sub_ctx = assemble_context(sub_passages, corpus, "standard", passage_cap)
        answer_user = templates.render(
            "simple", passages=format_passages(sub_ctx.entries), question=sub_q
        )
        sub_a = _call(llm, trace, f"subanswer_{iteration + 1}", system, answer_user, params)
        trace.sub_queries.append((sub_q, sub_a))
        _absorb(sub_passages)
    else:
        trace.flags.append("iteration_cap_reached")

    final_user = templates.render(
        "iterdrag_final",
        question=question,
        passages=format_passages(list(accumulated.items())[:passage_cap]),
        subqueries=_format_subqueries(trace.sub_queries),
    )
    trace.final_answer = _call(llm, trace, "final", system, final_user, params)
    trace.passages_used = list(accumulated.keys())
    trace.wall_time = time.perf_counter() - start
    return trace
