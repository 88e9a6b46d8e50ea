from __future__ import annotations

from curaflow.llm.base import (
    Backend,
    BackendUnavailable,
    LlmRequest,
    LlmResponse,
    MockExhausted,
    cache_key,
    complete,
    word_count,
)
from curaflow.llm.cached import CachedBackend
from curaflow.llm.http import HttpBackend, HttpConfig
from curaflow.llm.mock import MockBackend, MockRule


def backend_from_selector(selector: str, seed: int = 0) -> Backend:
    """Build a backend from ``mock:<script.json>``, ``http:<config.json>``
    or ``cached:<cache.jsonl>+<inner selector>``."""
    kind, sep, rest = selector.partition(":")
    if not sep or not rest:
        raise ValueError(f"bad backend selector {selector!r}")
    if kind == "mock":
        return MockBackend.from_file(rest, seed=seed)
    if kind == "http":
        return HttpBackend(HttpConfig.from_file(rest))
    if kind == "cached":
        path, plus, inner = rest.partition("+")
        if not plus:
            raise ValueError("cached backend needs an inner backend: cached:<file>+<selector>")
        return CachedBackend(backend_from_selector(inner, seed), path)
    raise ValueError(f"unknown backend kind {kind!r}")


def describe_backend(backend: Backend) -> dict:
    """Settings worth recording next to results produced with ``backend``."""
    if isinstance(backend, CachedBackend):
        return {"kind": "cached", "inner": describe_backend(backend.inner)}
    if isinstance(backend, HttpBackend):
        return {"kind": "http", "model": backend.config.model, "base_url": backend.config.base_url}
    return {"kind": getattr(backend, "kind", type(backend).__name__)}


__all__ = [
    "Backend",
    "BackendUnavailable",
    "CachedBackend",
    "HttpBackend",
    "HttpConfig",
    "LlmRequest",
    "LlmResponse",
    "MockBackend",
    "MockExhausted",
    "MockRule",
    "backend_from_selector",
    "cache_key",
    "describe_backend",
    "complete",
    "word_count",
]
