from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from decimal import ROUND_DOWN, Decimal
from typing import Protocol

from curaflow.model import CostLedger


class BackendUnavailable(RuntimeError):
    pass


class MockExhausted(RuntimeError):
    """A mock backend had no rule for a request: the test script is incomplete."""


@dataclass(frozen=True)
class LlmRequest:
    messages: tuple[tuple[str, str], ...]
    tag: str
    system: str = ""
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        msgs = tuple((str(r), str(t)) for r, t in self.messages)
        object.__setattr__(self, "messages", msgs)
        if not msgs:
            raise ValueError("request needs at least one message")
        for role, _ in msgs:
            if role not in ("user", "assistant"):
                raise ValueError(f"bad message role {role!r}")
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if not self.tag:
            raise ValueError("request tag must be non-empty")

    @classmethod
    def user(cls, text: str, tag: str, **kw) -> "LlmRequest":
        return cls(messages=(("user", text),), tag=tag, **kw)

    @property
    def last_message(self) -> str:
        return self.messages[-1][1]

    def prompt_text(self) -> str:
        return "\n".join([self.system] + [t for _, t in self.messages])


@dataclass(frozen=True)
class LlmResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def to_json(self) -> dict:
        return {"text": self.text, "prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens}

    @classmethod
    def from_json(cls, obj: dict) -> "LlmResponse":
        return cls(obj["text"], int(obj.get("prompt_tokens", 0)), int(obj.get("completion_tokens", 0)))


def word_count(text: str) -> int:
    return len(text.split())


def cache_key(request: LlmRequest) -> str:
    """Digest of everything that determines the completion; the tag is excluded."""
    temp = Decimal(repr(float(request.temperature))).quantize(Decimal("0.001"), rounding=ROUND_DOWN)
    payload = json.dumps(
        [request.system, [list(m) for m in request.messages], str(temp), request.max_tokens],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    kind: str

    def complete(self, request: LlmRequest, ledger: CostLedger) -> LlmResponse: ...


def complete(backend: Backend, request: LlmRequest, ledger: CostLedger) -> LlmResponse:
    return backend.complete(request, ledger)
