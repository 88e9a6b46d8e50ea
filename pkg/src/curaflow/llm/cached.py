from __future__ import annotations

import json
import threading
from pathlib import Path

from curaflow.llm.base import Backend, LlmRequest, LlmResponse, cache_key
from curaflow.model import CostLedger


class CachedBackend:
    """Replay cache in front of another backend.

    The cache file is append-only JSON lines ``{"key": ..., "response": {...}}``;
    later lines win when a key repeats. Hits bill ``cache_hits`` only.
    """

    kind = "cached"

    def __init__(self, inner: Backend, path: str | Path | None = None):
        self.inner = inner
        self.path = Path(path) if path else None
        self._store: dict[str, LlmResponse] = {}
        self._guard = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        if self.path and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        entry = json.loads(line)
                        self._store[entry["key"]] = LlmResponse.from_json(entry["response"])

    def __len__(self):
        return len(self._store)

    def _lock_for(self, key: str) -> threading.Lock:
        with self._guard:
            return self._key_locks.setdefault(key, threading.Lock())

    def complete(self, request: LlmRequest, ledger: CostLedger) -> LlmResponse:
        key = cache_key(request)
        with self._lock_for(key):
            hit = self._store.get(key)
            if hit is not None:
                ledger.record_cache_hit(request.tag)
                return hit
            resp = self.inner.complete(request, ledger)
            self._store[key] = resp
            if self.path:
                with self._guard, open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"key": key, "response": resp.to_json()}, ensure_ascii=False) + "\n")
            return resp
