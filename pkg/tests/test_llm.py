from __future__ import annotations

import json
import random

import httpx
import pytest

from curaflow.llm import (
    BackendUnavailable,
    CachedBackend,
    HttpBackend,
    HttpConfig,
    LlmRequest,
    MockBackend,
    MockExhausted,
    backend_from_selector,
    cache_key,
    complete,
)
from curaflow.model import CostLedger

from conftest import mock


def test_request_invariants():
    with pytest.raises(ValueError):
        LlmRequest((), "t")
    with pytest.raises(ValueError):
        LlmRequest.user("x", "")
    with pytest.raises(ValueError):
        LlmRequest.user("x", "t", temperature=2.5)
    with pytest.raises(ValueError):
        LlmRequest((("system", "x"),), "t")


def test_mock_rule_by_tag(ledger):
    b = mock({"tag": "tagging", "respond": "PERSON"})
    assert complete(b, LlmRequest.user("Ada", "tagging"), ledger).text == "PERSON"
    assert ledger.llm_calls == 1
    with pytest.raises(MockExhausted):
        complete(b, LlmRequest.user("Ada", "other"), ledger)


def test_mock_first_match_and_contains(ledger):
    b = mock(
        {"tag": "t:*", "contains": "PlayStation", "respond": "Sony"},
        {"tag": "t:*", "respond": "unknown"},
    )
    assert b.complete(LlmRequest.user("a PlayStation 5", "t:x"), ledger).text == "Sony"
    assert b.complete(LlmRequest.user("a kettle", "t:y"), ledger).text == "unknown"


def test_mock_once_rules_in_order(ledger):
    b = mock({"tag": "g", "respond": "bad code", "once": True}, {"tag": "g", "respond": "good code", "once": True})
    r = LlmRequest.user("write", "g")
    assert [b.complete(r, ledger).text for _ in range(2)] == ["bad code", "good code"]
    with pytest.raises(MockExhausted):
        b.complete(r, ledger)


def test_mock_default_and_token_counts(ledger):
    b = mock(default="two words")
    resp = b.complete(LlmRequest.user("one two three", "t", system="sys"), ledger)
    assert (resp.prompt_tokens, resp.completion_tokens) == (4, 2)
    assert ledger.tag("t") == {"llm_calls": 1, "prompt_tokens": 4, "completion_tokens": 2, "cache_hits": 0, "simulated_calls": 0}


def test_mock_choices_reproducible_per_seed(ledger):
    rules = {"tag": "coin", "choices": ["heads", "tails"]}
    runs = []
    for _ in range(2):
        b = mock(rules, seed=42)
        runs.append([b.complete(LlmRequest.user("flip", "coin"), ledger).text for _ in range(30)])
    assert runs[0] == runs[1]
    assert set(runs[0]) == {"heads", "tails"}


def test_cached_second_call_is_a_hit(ledger, tmp_path):
    path = tmp_path / "cache.jsonl"
    b = CachedBackend(mock({"respond": "answer"}), path)
    r = LlmRequest.user("question", "t")
    assert b.complete(r, ledger).text == b.complete(r, ledger).text == "answer"
    assert (ledger.llm_calls, ledger.cache_hits) == (1, 1)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["key"] == cache_key(r)
    # a fresh process replays from the file without touching the inner backend
    again = CachedBackend(mock(), path)
    led = CostLedger()
    assert again.complete(LlmRequest.user("question", "other-tag"), led).text == "answer"
    assert (led.llm_calls, led.cache_hits) == (0, 1)


def test_cache_key_rules():
    base = LlmRequest.user("hello", "a", temperature=0.1234)
    assert cache_key(base) == cache_key(LlmRequest.user("hello", "a", temperature=0.1234))
    assert cache_key(base) == cache_key(LlmRequest.user("hello", "b", temperature=0.1234))
    assert cache_key(base) == cache_key(LlmRequest.user("hello", "a", temperature=0.1239))
    assert cache_key(base) != cache_key(LlmRequest.user("hello", "a", temperature=0.124))
    assert cache_key(base) != cache_key(LlmRequest.user("hellp", "a", temperature=0.1234))
    assert cache_key(base) != cache_key(LlmRequest.user("hello", "a", temperature=0.1234, max_tokens=5))
    assert cache_key(base) != cache_key(LlmRequest.user("hello", "a", temperature=0.1234, system="s"))


def test_cache_key_no_collisions_over_corpus():
    rng = random.Random(3)
    seen = {}
    for i in range(10_000):
        text = "".join(rng.choice("abcdefgh ") for _ in range(rng.randint(0, 12))) + f"#{i}"
        r = LlmRequest.user(text, "t", temperature=rng.choice([0.0, 0.5, 1.0]))
        k = cache_key(r)
        assert k not in seen, (seen.get(k), r)
        seen[k] = r
    assert len(seen) == 10_000


def chat(content="ok", usage=None):
    body = {"choices": [{"message": {"content": content}}]}
    if usage:
        body["usage"] = usage
    return httpx.Response(200, json=body)


def http_backend(handler, monkeypatch, retries=3):
    monkeypatch.setenv("TEST_KEY", "sekrit")
    sleeps = []
    cfg = HttpConfig("https://llm.test/v1", "model-x", api_key_env="TEST_KEY", max_retries=retries)
    return HttpBackend(cfg, transport=httpx.MockTransport(handler), sleep=sleeps.append), sleeps


def test_http_payload_and_auth(monkeypatch, ledger):
    seen = []

    def handler(request: httpx.Request):
        seen.append(request)
        return chat("fine", {"prompt_tokens": 7, "completion_tokens": 1})

    b, _ = http_backend(handler, monkeypatch)
    resp = b.complete(LlmRequest.user("hi", "t", system="be brief"), ledger)
    assert resp.text == "fine" and ledger.prompt_tokens == 7
    req = seen[0]
    assert req.url == "https://llm.test/v1/chat/completions"
    assert req.headers["authorization"] == "Bearer sekrit"
    body = json.loads(req.content)
    assert body["messages"] == [{"role": "system", "content": "be brief"}, {"role": "user", "content": "hi"}]
    assert body["model"] == "model-x" and body["temperature"] == 0.0


def test_http_backoff_then_success(monkeypatch, ledger):
    replies = iter([httpx.Response(503), httpx.Response(500), chat("late")])
    b, sleeps = http_backend(lambda r: next(replies), monkeypatch)
    assert b.complete(LlmRequest.user("hi", "t"), ledger).text == "late"
    assert sleeps == [1.0, 2.0]
    assert ledger.llm_calls == 1


def test_http_gives_up(monkeypatch, ledger):
    def handler(request):
        raise httpx.ConnectError("refused")

    b, sleeps = http_backend(handler, monkeypatch, retries=2)
    with pytest.raises(BackendUnavailable, match="3 attempts"):
        b.complete(LlmRequest.user("hi", "t"), ledger)
    assert sleeps == [1.0, 2.0]
    assert ledger.llm_calls == 0


def test_http_client_error_not_retried(monkeypatch, ledger):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="no")

    b, _ = http_backend(handler, monkeypatch)
    with pytest.raises(BackendUnavailable):
        b.complete(LlmRequest.user("hi", "t"), ledger)
    assert len(calls) == 1


def test_selector(tmp_path):
    script = tmp_path / "m.json"
    script.write_text(json.dumps({"rules": [{"respond": "x"}]}))
    assert isinstance(backend_from_selector(f"mock:{script}"), MockBackend)
    cfg = tmp_path / "h.json"
    cfg.write_text(json.dumps({"base_url": "https://x", "model": "m"}))
    cached = backend_from_selector(f"cached:{tmp_path / 'c.jsonl'}+mock:{script}")
    assert isinstance(cached, CachedBackend) and isinstance(cached.inner, MockBackend)
    assert isinstance(backend_from_selector(f"http:{cfg}"), HttpBackend)
    for bad in ("mock", "ftp:x", f"cached:{tmp_path / 'c.jsonl'}"):
        with pytest.raises(ValueError):
            backend_from_selector(bad)


def test_describe_backend(tmp_path):
    from curaflow.llm import CachedBackend, HttpBackend, HttpConfig, MockBackend, describe_backend

    http = HttpBackend(HttpConfig("https://llm.example/v1", "m-1"))
    assert describe_backend(CachedBackend(http, tmp_path / "c.jsonl")) == {
        "kind": "cached",
        "inner": {"kind": "http", "model": "m-1", "base_url": "https://llm.example/v1"},
    }
    assert describe_backend(MockBackend()) == {"kind": "mock"}
