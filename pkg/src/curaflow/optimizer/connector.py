"""Policy-mediated access to local tables.

A policy registers named query templates; nothing else can be run. Each
template selects rows by equality/range predicates on whitelisted columns
and projects whitelisted columns. Every attempt, accepted or not, leaves an
audit entry.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from curaflow.model import Schema, Table

OPS = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
}


class ConnectorError(RuntimeError):
    pass


class UnknownQuery(ConnectorError):
    def __init__(self, name: str):
        super().__init__(f"query {name!r} is not registered in the connector policy")
        self.name = name


class BadParams(ConnectorError):
    pass


class BudgetExceeded(ConnectorError):
    def __init__(self, used: int, requested: int, budget: int):
        super().__init__(f"row budget exhausted: {used} used + {requested} requested > {budget}")
        self.used = used
        self.requested = requested
        self.budget = budget


class PolicyError(ValueError):
    pass


@dataclass(frozen=True)
class Predicate:
    column: str
    op: str
    param: str

    def __post_init__(self):
        if self.op not in OPS:
            raise PolicyError(f"unknown predicate operator {self.op!r}")


@dataclass(frozen=True)
class QueryTemplate:
    select: tuple[str, ...]
    where: tuple[Predicate, ...] = ()

    @property
    def params(self) -> list[str]:
        out = []
        for p in self.where:
            if p.param not in out:
                out.append(p.param)
        return out


@dataclass(frozen=True)
class ConnectorPolicy:
    whitelist: tuple[str, ...]
    queries: Mapping[str, QueryTemplate]
    max_rows_per_query: int = 50
    total_row_budget: int = 1000

    def __post_init__(self):
        if self.max_rows_per_query <= 0 or self.total_row_budget <= 0:
            raise PolicyError("connector budgets must be positive")
        allowed = set(self.whitelist)
        for name, q in self.queries.items():
            if not q.select:
                raise PolicyError(f"query {name!r} projects no columns")
            bad = [c for c in q.select if c not in allowed] + [p.column for p in q.where if p.column not in allowed]
            if bad:
                raise PolicyError(f"query {name!r} uses non-whitelisted column(s) {sorted(set(bad))}")

    @classmethod
    def from_dict(cls, obj: Mapping) -> "ConnectorPolicy":
        queries = {}
        for name, q in obj.get("queries", {}).items():
            where = tuple(Predicate(p["column"], p.get("op", "eq"), p.get("param", p["column"])) for p in q.get("where", []))
            queries[name] = QueryTemplate(tuple(q["select"]), where)
        return cls(
            whitelist=tuple(obj["whitelist"]),
            queries=queries,
            max_rows_per_query=int(obj.get("max_rows_per_query", 50)),
            total_row_budget=int(obj.get("total_row_budget", 1000)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ConnectorPolicy":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _param_ok(value: Any, col_type: str | None) -> bool:
    if value is None or isinstance(value, (list, dict)):
        return False
    if col_type in ("int", "float"):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if col_type == "bool":
        return isinstance(value, bool)
    return isinstance(value, str)


@dataclass
class Connector:
    """Executes whitelisted queries and keeps the audit log and row budget."""

    policy: ConnectorPolicy
    audit_path: str | Path | None = None
    clock: Callable[[], float] = time.time
    audit: list[dict] = field(default_factory=list)
    rows_used: int = 0

    def __post_init__(self):
        self._lock = threading.Lock()

    def _log(self, query: str, params: Any, rows: int, status: str, reason: str = "") -> None:
        entry = {"ts": self.clock(), "query": query, "params": params, "rows": rows, "status": status}
        if reason:
            entry["reason"] = reason
        self.audit.append(entry)
        if self.audit_path is not None:
            with open(self.audit_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True, default=str) + "\n")

    def execute(self, query_name: str, params: Mapping[str, Any], table: Table) -> Table:
        with self._lock:
            safe_params = dict(params) if isinstance(params, Mapping) else {"_": repr(params)}
            q = self.policy.queries.get(query_name)
            if q is None:
                self._log(query_name, safe_params, 0, "rejected", "unknown query")
                raise UnknownQuery(query_name)
            try:
                self._check(q, params, table)
            except BadParams as exc:
                self._log(query_name, safe_params, 0, "rejected", str(exc))
                raise
            hits = [r for r in table.rows if all(self._holds(p, r.get(p.column), params[p.param]) for p in q.where)]
            truncated = len(hits) > self.policy.max_rows_per_query
            hits = hits[: self.policy.max_rows_per_query]
            if self.rows_used + len(hits) > self.policy.total_row_budget:
                self._log(query_name, safe_params, 0, "rejected", "row budget exhausted")
                raise BudgetExceeded(self.rows_used, len(hits), self.policy.total_row_budget)
            self.rows_used += len(hits)
            self._log(query_name, safe_params, len(hits), "truncated" if truncated else "accepted")
            schema = Schema(tuple((c, table.schema.type_of(c)) for c in q.select))
            return Table(schema, tuple({c: r.get(c) for c in q.select} for r in hits))

    def _check(self, q: QueryTemplate, params: Any, table: Table) -> None:
        if not isinstance(params, Mapping):
            raise BadParams("query parameters must be a record")
        declared = q.params
        extra = sorted(set(params) - set(declared))
        missing = [p for p in declared if p not in params]
        if extra or missing:
            raise BadParams(f"parameters must be exactly {declared}; missing {missing}, unexpected {extra}")
        for c in list(q.select) + [p.column for p in q.where]:
            if table.schema.type_of(c) is None:
                raise BadParams(f"table has no column {c!r}")
        for p in q.where:
            if not _param_ok(params[p.param], table.schema.type_of(p.column)):
                raise BadParams(f"parameter {p.param!r} does not fit column {p.column!r}")

    @staticmethod
    def _holds(p: Predicate, cell: Any, arg: Any) -> bool:
        if cell is None:
            return False
        return OPS[p.op](cell, arg)


def connector_execute(connector: Connector, query_name: str, params: Mapping[str, Any], table: Table) -> Table:
    return connector.execute(query_name, params, table)


TRUNCATION_MARKER = "… truncated"


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        text = "true" if v else "false"
    else:
        text = str(v)
    return text.replace("\\", "\\\\").replace("|", "\\|").replace("\n", "\\n")


def render_for_prompt(table: Table, max_cells: int) -> str:
    """Pipe-delimited header and rows; whole rows only, up to ``max_cells`` cells."""
    names = table.schema.names
    lines = [" | ".join(_cell(n) for n in names)]
    used = 0
    for row in table.rows:
        if used + len(names) > max_cells:
            lines.append(TRUNCATION_MARKER)
            break
        lines.append(" | ".join(_cell(row.get(n)) for n in names))
        used += len(names)
    return "\n".join(lines)
