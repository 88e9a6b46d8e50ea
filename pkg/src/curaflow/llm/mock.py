"""Scripted, deterministic stand-in for a completion service.

A script is an ordered list of rules plus an optional default::

    {
      "rules": [
        {"tag": "tag:*", "contains": "PlayStation", "respond": "Sony"},
        {"tag": "impute:generate", "respond": "```return 1;```", "once": true},
        {"tag": "coin", "choices": ["heads", "tails"]}
      ],
      "default": "unknown"
    }

``tag`` is a shell-style pattern over the request tag, ``contains`` a
substring of the last message. The first live rule that matches wins; a
``once`` rule is retired after it answers. ``choices`` draws from a
generator seeded at construction, so runs are reproducible per seed.
"""

from __future__ import annotations

import fnmatch
import json
import random
import threading
from dataclasses import dataclass
from pathlib import Path

from curaflow.llm.base import LlmRequest, LlmResponse, MockExhausted, word_count
from curaflow.model import CostLedger


@dataclass
class MockRule:
    respond: str | None = None
    tag: str | None = None
    contains: str | None = None
    choices: list[str] | None = None
    once: bool = False

    def __post_init__(self):
        if (self.respond is None) == (self.choices is None):
            raise ValueError("mock rule needs exactly one of respond / choices")

    def matches(self, request: LlmRequest) -> bool:
        if self.tag is not None and not fnmatch.fnmatchcase(request.tag, self.tag):
            return False
        if self.contains is not None and self.contains not in request.last_message:
            return False
        return True


class MockBackend:
    kind = "mock"

    def __init__(self, rules: list[MockRule] | None = None, default: str | None = None, seed: int = 0):
        self.rules = list(rules or [])
        self.default = default
        self._live = [True] * len(self.rules)
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.history: list[LlmRequest] = []

    @classmethod
    def from_dict(cls, obj: dict, seed: int = 0) -> "MockBackend":
        rules = [MockRule(**r) for r in obj.get("rules", [])]
        return cls(rules, obj.get("default"), seed=seed)

    @classmethod
    def from_file(cls, path: str | Path, seed: int = 0) -> "MockBackend":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), seed=seed)

    def _answer(self, request: LlmRequest) -> str:
        with self._lock:
            self.history.append(request)
            for i, rule in enumerate(self.rules):
                if not self._live[i] or not rule.matches(request):
                    continue
                if rule.once:
                    self._live[i] = False
                if rule.choices is not None:
                    return self._rng.choice(rule.choices)
                return rule.respond
            if self.default is not None:
                return self.default
        raise MockExhausted(f"no mock rule for request tagged {request.tag!r}")

    def complete(self, request: LlmRequest, ledger: CostLedger) -> LlmResponse:
        text = self._answer(request)
        resp = LlmResponse(text, word_count(request.prompt_text()), word_count(text))
        ledger.record_call(request.tag, resp.prompt_tokens, resp.completion_tokens)
        return resp
