"""Chat-completion client abstraction.

Generation and judging both talk to an LLMClient: either an
OpenAI-compatible HTTP endpoint or a scripted mock for tests. Transport
retries live here; content-level fallbacks belong to the callers.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import requests


class LLMError(RuntimeError):
    pass


class LLMTransportError(LLMError):
    pass


@dataclass(frozen=True)
class LLMParams:
    temperature: float = 0.1
    max_tokens: int = 1024
    model: str = ""


class LLMClient(Protocol):
    def complete(self, system: str, user: str, params: LLMParams) -> str: ...


class HttpChatClient:
    """OpenAI-compatible chat completions client with timeout and retries."""

    def __init__(
        self,
        base_url: str,
        api_key_env: str = "RAGBENCH_LLM_API_KEY",
        retries: int = 2,
        timeout: float = 120.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = os.environ.get(api_key_env, "")
        self.retries = retries
        self.timeout = timeout
        self._session = requests.Session()

    def complete(self, system: str, user: str, params: LLMParams) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": params.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.post(
                    f"{self.base_url}/chat/completions", json=payload,
                    headers=headers, timeout=self.timeout,
                )
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, ValueError, IndexError) as exc:
                last_exc = exc
                if attempt < self.retries:
                    time.sleep(min(2.0**attempt, 8.0))
        raise LLMTransportError(f"chat request failed after {self.retries + 1} attempts: {last_exc}")


class MockLLM:
    """Scripted mock: pops queued responses in order, or applies a rule.

    Exhausting the script raises, so tests catch any hidden extra call.
    All (system, user) prompts are recorded in ``calls``.
    """

    def __init__(
        self,
        responses: Sequence[str] | None = None,
        rule: Callable[[str, str], str] | None = None,
    ):
        if (responses is None) == (rule is None):
            raise ValueError("provide exactly one of responses or rule")
        self._queue = list(responses) if responses is not None else None
        self._rule = rule
        self.calls: list[tuple[str, str]] = []

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, system: str, user: str, params: LLMParams) -> str:
        self.calls.append((system, user))
        if self._rule is not None:
            return self._rule(system, user)
        if not self._queue:
            raise LLMError(f"mock script exhausted at call {len(self.calls)}")
        return self._queue.pop(0)
