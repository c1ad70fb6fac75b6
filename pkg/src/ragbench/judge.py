"""LLM-as-judge scoring of generated answers.

The default rubric grades correctness on {-1, 0, 1, 2} and faithfulness
on {-1, 0, 1} and demands a bare JSON object back. Gold answer and gold
document can be omitted (live-day mode); omitted slots render as "N/A".
Parsing is lenient about code fences and surrounding prose but strict
about types and ranges: non-integers (including 1.5) are rejected, not
rounded.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

from .generation import TemplateSet, default_templates
from .llm import LLMClient, LLMParams

CORRECTNESS_VALUES = (-1, 0, 1, 2)
FAITHFULNESS_VALUES = (-1, 0, 1)

OMITTED = "N/A"


class JudgeError(RuntimeError):
    pass


class JudgmentParseError(JudgeError):
    """kind is one of: no_json, missing_field, out_of_range."""

    def __init__(self, kind: str, message: str, raw: str):
        super().__init__(message)
        self.kind = kind
        self.raw = raw


@dataclass(frozen=True)
class Judgment:
    correctness: int
    faithfulness: int
    raw: str
    judge_model: str = ""


@dataclass(frozen=True)
class JudgeRequest:
    question: str
    generated_answer: str
    gold_answer: str | None = None
    gold_document: str | None = None
    retrieved_passages: tuple[str, ...] = ()


def build_judge_prompt(
    req: JudgeRequest, templates: TemplateSet | None = None
) -> tuple[str, str]:
    if not req.generated_answer.strip():
        raise ValueError("generated_answer must be non-empty")
    templates = templates or default_templates()
    passages = "\n\n".join(req.retrieved_passages) if req.retrieved_passages else OMITTED
    user = templates.render(
        "judge_liverag_user",
        question=req.question,
        gold_answer=req.gold_answer if req.gold_answer is not None else OMITTED,
        gold_document=req.gold_document if req.gold_document is not None else OMITTED,
        generated_answer=req.generated_answer,
        retrieved_passages=passages,
    )
    return templates.raw("judge_liverag_system"), user


def _first_json_object(text: str) -> dict | None:
    cleaned = re.sub(r"```[a-zA-Z]*", "", text).replace("```", "")
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", cleaned):
        try:
            value, _ = decoder.raw_decode(cleaned, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(value, dict):
            return value
    return None


def _require_int(obj: dict, name: str, allowed: tuple[int, ...], raw: str) -> int:
    if name not in obj:
        raise JudgmentParseError("missing_field", f"missing field {name!r}", raw)
    value = obj[name]
    if isinstance(value, bool) or not isinstance(value, int):
        raise JudgmentParseError(
            "out_of_range", f"{name} must be an integer, got {value!r}", raw
        )
    if value not in allowed:
        raise JudgmentParseError(
            "out_of_range", f"{name} value {value} outside {allowed}", raw
        )
    return value


def parse_judgment(text: str, judge_model: str = "") -> Judgment:
    obj = _first_json_object(text)
    if obj is None:
        raise JudgmentParseError("no_json", "no JSON object found in judge output", text)
    correctness = _require_int(obj, "correctness", CORRECTNESS_VALUES, text)
    faithfulness = _require_int(obj, "faithfulness", FAITHFULNESS_VALUES, text)
    return Judgment(correctness=correctness, faithfulness=faithfulness,
                    raw=text, judge_model=judge_model)


def parse_ordinal_score(text: str, field: str = "score",
                        allowed: Sequence[int] = (-1, 0, 1, 2)) -> int:
    """Generic parser for the alternate single-score rubric templates."""
    obj = _first_json_object(text)
    if obj is None:
        raise JudgmentParseError("no_json", "no JSON object found in judge output", text)
    return _require_int(obj, field, tuple(allowed), text)


def judge_answer(
    judge: LLMClient,
    req: JudgeRequest,
    params: LLMParams = LLMParams(),
    templates: TemplateSet | None = None,
) -> Judgment:
    """Run the judge once; on a parse failure re-ask once with a reminder."""
    system, user = build_judge_prompt(req, templates)
    raw = judge.complete(system, user, params)
    try:
        return parse_judgment(raw, judge_model=params.model)
    except JudgmentParseError:
        reminder = user + "\n\nReturn only the JSON object."
        raw = judge.complete(system, reminder, params)
        return parse_judgment(raw, judge_model=params.model)
