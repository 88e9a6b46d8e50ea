from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import httpx

from curaflow.llm.base import BackendUnavailable, LlmRequest, LlmResponse, word_count
from curaflow.model import CostLedger


@dataclass(frozen=True)
class HttpConfig:
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3

    @classmethod
    def from_file(cls, path: str | Path) -> "HttpConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


class HttpBackend:
    """Chat-completions client with exponential backoff (1s, 2s, 4s, ...)."""

    kind = "http"

    def __init__(
        self,
        config: HttpConfig,
        *,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._sleep = sleep
        headers = {}
        key = os.environ.get(config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            headers=headers,
            timeout=config.timeout,
            transport=transport,
        )

    def payload(self, request: LlmRequest) -> dict:
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages += [{"role": r, "content": t} for r, t in request.messages]
        return {
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def _post(self, body: dict) -> dict:
        last_error = "no attempt made"
        attempts = self.config.max_retries + 1
        for attempt in range(attempts):
            if attempt:
                self._sleep(2.0 ** (attempt - 1))
            try:
                resp = self._client.post("/chat/completions", json=body)
            except httpx.TransportError as exc:
                last_error = f"transport error: {exc}"
                continue
            if resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return resp.json()
        raise BackendUnavailable(f"gave up after {attempts} attempts ({last_error})")

    def complete(self, request: LlmRequest, ledger: CostLedger) -> LlmResponse:
        data = self._post(self.payload(request))
        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed completion response: {exc!r}") from exc
        usage = data.get("usage") or {}
        resp = LlmResponse(
            text,
            int(usage.get("prompt_tokens", word_count(request.prompt_text()))),
            int(usage.get("completion_tokens", word_count(text))),
        )
        ledger.record_call(request.tag, resp.prompt_tokens, resp.completion_tokens)
        return resp

    def close(self) -> None:
        self._client.close()
