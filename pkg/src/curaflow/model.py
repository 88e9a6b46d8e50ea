"""Value model shared by every stage of the engine.

Values are plain Python objects:

    None            -> Null
    bool            -> Bool
    int             -> Int (64-bit)
    float           -> Float
    str             -> Text
    list / tuple    -> List
    dict            -> Record (insertion-ordered)
    Table           -> TableRef

Tables are immutable; records inside a table must not be mutated after the
table is built.
"""

from __future__ import annotations

import json
import math
import threading
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1
MAX_DEPTH = 32
MAX_DECORATION_DEPTH = 4

COLUMN_TYPES = ("bool", "int", "float", "text")
MODULE_KINDS = ("custom", "llm", "llmgc", "decorated")
RESERVED_FIELDS = ("__order", "__table")


class InvalidValue(ValueError):
    """Raised when a Python object is not a legal Value."""


class TypeMismatch(TypeError):
    pass


# --------------------------------------------------------------------------
# Schema / Table


@dataclass(frozen=True)
class Schema:
    columns: tuple[tuple[str, str], ...]

    def __post_init__(self):
        cols = tuple((str(n), str(t)) for n, t in self.columns)
        object.__setattr__(self, "columns", cols)
        if not cols:
            raise ValueError("schema needs at least one column")
        seen = set()
        for name, tag in cols:
            if not name:
                raise ValueError("empty column name")
            if name in seen:
                raise ValueError(f"duplicate column {name!r}")
            if tag not in COLUMN_TYPES:
                raise ValueError(f"column {name!r}: unknown type {tag!r}")
            seen.add(name)

    @classmethod
    def of(cls, *columns: tuple[str, str]) -> "Schema":
        return cls(tuple(columns))

    @classmethod
    def parse(cls, text: str) -> "Schema":
        """Parse ``"name:text,price:float"``; a bare name means text."""
        cols = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            name, _, tag = part.partition(":")
            cols.append((name.strip(), tag.strip() or "text"))
        return cls(tuple(cols))

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.columns]

    def type_of(self, name: str) -> str | None:
        for n, t in self.columns:
            if n == name:
                return t
        return None

    def to_json(self) -> list:
        return [[n, t] for n, t in self.columns]

    def __str__(self):
        return ",".join(f"{n}:{t}" for n, t in self.columns)


@dataclass(frozen=True)
class Table:
    schema: Schema
    rows: tuple[dict, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        return [r.get(name) for r in self.rows]

    def with_rows(self, rows: Iterable[dict]) -> "Table":
        return Table(self.schema, tuple(rows))


@dataclass(frozen=True)
class Violation:
    row: int
    column: str
    reason: str


def _cell_type_ok(tag: str, value: Any) -> bool:
    if value is None:
        return True
    if tag == "bool":
        return isinstance(value, bool)
    if tag == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if tag == "float":
        return isinstance(value, float)
    return isinstance(value, str)


def conform(table: Table) -> list[Violation]:
    """Return every invariant violation in ``table``; empty list means ok."""
    out: list[Violation] = []
    names = table.schema.names
    for i, row in enumerate(table.rows):
        if not isinstance(row, Mapping):
            out.append(Violation(i, "", "not_a_record"))
            continue
        keys = list(row.keys())
        for name in names:
            if name not in row:
                out.append(Violation(i, name, "missing_column"))
        for key in keys:
            if key not in names:
                out.append(Violation(i, str(key), "unexpected_column"))
        present = [k for k in keys if k in names]
        if present != [n for n in names if n in row]:
            out.append(Violation(i, "", "column_order"))
        for name, tag in table.schema.columns:
            if name in row and not _cell_type_ok(tag, row[name]):
                out.append(Violation(i, name, "type_mismatch"))
    return out


# --------------------------------------------------------------------------
# Value checks


def type_tag(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "text"
    if isinstance(value, (list, tuple)):
        return "list"
    if isinstance(value, Mapping):
        return "record"
    if isinstance(value, Table):
        return "table"
    raise InvalidValue(f"not a value: {type(value).__name__}")


def check_value(value: Any, _depth: int = 0) -> None:
    """Raise ``InvalidValue`` unless ``value`` obeys the Value invariants."""
    if _depth > MAX_DEPTH:
        raise InvalidValue(f"nesting deeper than {MAX_DEPTH}")
    tag = type_tag(value)
    if tag == "int" and not INT_MIN <= value <= INT_MAX:
        raise InvalidValue(f"integer out of 64-bit range: {value}")
    elif tag == "list":
        for item in value:
            check_value(item, _depth + 1)
    elif tag == "record":
        for key, item in value.items():
            if not isinstance(key, str) or not key:
                raise InvalidValue(f"bad record field name {key!r}")
            if key in RESERVED_FIELDS:
                raise InvalidValue(f"reserved record field name {key!r}")
            check_value(item, _depth + 1)


def depth(value: Any) -> int:
    if isinstance(value, (list, tuple)):
        return 1 + max((depth(v) for v in value), default=0)
    if isinstance(value, Mapping):
        return 1 + max((depth(v) for v in value.values()), default=0)
    return 0


# --------------------------------------------------------------------------
# Comparison


@dataclass(frozen=True)
class Comparator:
    mode: str = "exact"
    epsilon: float | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "normalized_text", "numeric_tolerance"):
            raise ValueError(f"unknown comparator {self.mode!r}")
        if self.mode == "numeric_tolerance" and not (self.epsilon and self.epsilon > 0):
            raise ValueError("numeric_tolerance needs epsilon > 0")

    @classmethod
    def coerce(cls, c: "Comparator | str | None") -> "Comparator":
        if c is None:
            return EXACT
        if isinstance(c, Comparator):
            return c
        text = str(c).strip()
        if text.startswith("numeric_tolerance"):
            inner = text[len("numeric_tolerance"):].strip("() ")
            return cls("numeric_tolerance", float(inner))
        return cls(text)

    def to_json(self):
        if self.mode == "numeric_tolerance":
            return {"mode": self.mode, "epsilon": self.epsilon}
        return self.mode

    def __str__(self):
        if self.mode == "numeric_tolerance":
            return f"numeric_tolerance({self.epsilon!r})"
        return self.mode


EXACT = Comparator("exact")
NORMALIZED_TEXT = Comparator("normalized_text")


def numeric_tolerance(epsilon: float) -> Comparator:
    return Comparator("numeric_tolerance", epsilon)


def normalize_text(s: str) -> str:
    s = unicodedata.normalize("NFKC", s).casefold()
    return " ".join(s.split())


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def value_equal(a: Any, b: Any, comparator: Comparator | str = EXACT) -> bool:
    cmp = Comparator.coerce(comparator)
    return _equal(a, b, cmp)


def _equal(a: Any, b: Any, cmp: Comparator) -> bool:
    ta, tb = type_tag(a), type_tag(b)
    if cmp.mode == "numeric_tolerance":
        leaf_a = ta not in ("list", "record", "table")
        leaf_b = tb not in ("list", "record", "table")
        if leaf_a or leaf_b:
            if leaf_a and not _is_number(a) or leaf_b and not _is_number(b):
                raise TypeMismatch(f"numeric_tolerance on {ta} / {tb} leaf")
            if not (leaf_a and leaf_b):
                return False
            return abs(a - b) <= cmp.epsilon
    if ta != tb:
        return False
    if ta == "list":
        return len(a) == len(b) and all(_equal(x, y, cmp) for x, y in zip(a, b))
    if ta == "record":
        if list(a.keys()) != list(b.keys()):
            return False
        return all(_equal(a[k], b[k], cmp) for k in a)
    if ta == "table":
        if a.schema != b.schema or len(a.rows) != len(b.rows):
            return False
        return all(_equal(dict(x), dict(y), cmp) for x, y in zip(a.rows, b.rows))
    if ta == "text" and cmp.mode == "normalized_text":
        return normalize_text(a) == normalize_text(b)
    if ta == "float" and math.isnan(a) and math.isnan(b):
        return True
    return a == b


# --------------------------------------------------------------------------
# Canonical JSON


def to_json(value: Any) -> Any:
    tag = type_tag(value)
    if tag == "list":
        return [to_json(v) for v in value]
    if tag == "record":
        keys = list(value.keys())
        obj = {k: to_json(value[k]) for k in sorted(keys)}
        if keys != sorted(keys):
            obj["__order"] = keys
        return obj
    if tag == "table":
        return {"__table": table_to_json(value)}
    return value


def from_json(obj: Any) -> Any:
    if isinstance(obj, list):
        return [from_json(v) for v in obj]
    if isinstance(obj, dict):
        if set(obj) == {"__table"}:
            return table_from_json(obj["__table"])
        order = obj.get("__order")
        keys = order if order is not None else sorted(k for k in obj if k != "__order")
        return {k: from_json(obj[k]) for k in keys}
    return obj


def table_to_json(table: Table) -> dict:
    names = table.schema.names
    return {
        "schema": table.schema.to_json(),
        "rows": [[to_json(row.get(n)) for n in names] for row in table.rows],
    }


def table_from_json(obj: Mapping) -> Table:
    schema = Schema(tuple((n, t) for n, t in obj["schema"]))
    names = schema.names
    rows = tuple(dict(zip(names, (from_json(c) for c in cells))) for cells in obj["rows"])
    return Table(schema, rows)


def dumps(value: Any) -> str:
    """Canonical, byte-stable JSON text for a Value."""
    return json.dumps(to_json(value), ensure_ascii=False, separators=(",", ":"), sort_keys=True)


def loads(text: str) -> Any:
    return from_json(json.loads(text))


# --------------------------------------------------------------------------
# Module descriptors and test cases

SCALAR_SHAPES = ("null", "bool", "int", "float", "text")
SHAPES = SCALAR_SHAPES + ("any", "none", "record", "list", "table")


def check_shape(shape: str) -> str:
    s = shape.strip()
    if s.startswith("list<") and s.endswith(">"):
        check_shape(s[5:-1])
        return s
    if s not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}")
    return s


def shape_accepts(shape: str, value: Any) -> bool:
    """True when ``value`` fits the declared shape."""
    if shape == "any":
        return True
    if shape == "none":
        return value is None
    tag = type_tag(value)
    if value is None:
        # missing data may flow anywhere except into table/list consumers
        return shape not in ("table", "list") and not shape.startswith("list<")
    if shape.startswith("list<"):
        inner = shape[5:-1]
        return tag == "list" and all(shape_accepts(inner, v) for v in value)
    if shape == "float" and tag == "int":
        return True
    return tag == shape


def shapes_compatible(produced: str, consumed: str) -> bool:
    if "any" in (produced, consumed):
        return True
    if produced == consumed:
        return True
    if consumed == "list" and produced.startswith("list<"):
        return True
    if produced.startswith("list<") and consumed.startswith("list<"):
        return shapes_compatible(produced[5:-1], consumed[5:-1])
    if produced == "int" and consumed == "float":
        return True
    return False


_KIND_CONFIG = {"custom": "name", "llm": "prompt", "llmgc": "task"}


@dataclass(frozen=True)
class ModuleDescriptor:
    id: str
    kind: str
    input_shape: str = "any"
    output_shape: str = "any"
    config: Mapping[str, Any] = field(default_factory=dict)
    inner: "ModuleDescriptor | None" = None
    decorations: tuple = ()

    def __post_init__(self):
        if self.kind not in MODULE_KINDS:
            raise ValueError(f"unknown module kind {self.kind!r}")
        check_shape(self.input_shape)
        check_shape(self.output_shape)
        if self.kind == "decorated":
            if self.inner is None or not self.decorations:
                raise ValueError("decorated descriptor needs an inner descriptor and decorations")
            if self.nesting() > MAX_DECORATION_DEPTH:
                raise ValueError(f"decorations nest deeper than {MAX_DECORATION_DEPTH}")
        else:
            key = _KIND_CONFIG[self.kind]
            if key not in self.config:
                raise ValueError(f"{self.kind} descriptor needs config {key!r}")

    def nesting(self) -> int:
        if self.kind != "decorated":
            return 0
        return len(self.decorations) + self.inner.nesting()


@dataclass(frozen=True)
class TestCase:
    input: Any
    expected: Any
    comparator: Comparator = EXACT

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        object.__setattr__(self, "comparator", Comparator.coerce(self.comparator))

    def passes(self, actual: Any) -> bool:
        try:
            return value_equal(actual, self.expected, self.comparator)
        except TypeMismatch:
            return False

    def to_json(self) -> dict:
        return {
            "input": to_json(self.input),
            "expected": to_json(self.expected),
            "comparator": self.comparator.to_json(),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "TestCase":
        cmp = obj.get("comparator", "exact")
        if isinstance(cmp, Mapping):
            cmp = Comparator(cmp["mode"], cmp.get("epsilon"))
        return cls(from_json(obj["input"]), from_json(obj["expected"]), cmp)


# --------------------------------------------------------------------------
# Cost ledger

COUNTERS = ("llm_calls", "prompt_tokens", "completion_tokens", "cache_hits", "simulated_calls")


def _zero() -> dict[str, int]:
    return dict.fromkeys(COUNTERS, 0)


class CostLedger:
    """Thread-safe call and token counters, totals plus a per-tag breakdown."""

    def __init__(self):
        self._lock = threading.Lock()
        self._totals = _zero()
        self._tags: dict[str, dict[str, int]] = {}

    def _bump(self, tag: str, **amounts: int) -> None:
        if not tag:
            raise ValueError("ledger tag must be non-empty")
        with self._lock:
            bucket = self._tags.setdefault(tag, _zero())
            for name, n in amounts.items():
                if n < 0:
                    raise ValueError("ledger counters never decrease")
                self._totals[name] += n
                bucket[name] += n

    def record_call(self, tag: str, prompt_tokens: int = 0, completion_tokens: int = 0) -> None:
        self._bump(tag, llm_calls=1, prompt_tokens=prompt_tokens, completion_tokens=completion_tokens)

    def record_cache_hit(self, tag: str) -> None:
        self._bump(tag, cache_hits=1)

    def record_simulated(self, tag: str) -> None:
        self._bump(tag, simulated_calls=1)

    def __getattr__(self, name):
        if name in COUNTERS:
            with self._lock:
                return self._totals[name]
        raise AttributeError(name)

    def tag(self, tag: str) -> dict[str, int]:
        with self._lock:
            return dict(self._tags.get(tag, _zero()))

    def snapshot(self) -> dict:
        with self._lock:
            return {
                **self._totals,
                "per_tag": {t: dict(c) for t, c in sorted(self._tags.items())},
            }

    def is_conserved(self) -> bool:
        snap = self.snapshot()
        return all(
            snap[c] == sum(b[c] for b in snap["per_tag"].values()) for c in COUNTERS
        )


def ledger_delta(before: Mapping, after: Mapping) -> dict:
    """Counter difference between two snapshots."""
    out = {c: after[c] - before[c] for c in COUNTERS}
    per_tag = {}
    for t, counts in after["per_tag"].items():
        prev = before["per_tag"].get(t, _zero())
        d = {c: counts[c] - prev[c] for c in COUNTERS}
        if any(d.values()):
            per_tag[t] = d
    out["per_tag"] = per_tag
    return out


def ledger_sum(snapshots: Sequence[Mapping]) -> dict:
    out = _zero()
    per_tag: dict[str, dict[str, int]] = {}
    for s in snapshots:
        for c in COUNTERS:
            out[c] += s[c]
        for t, counts in s["per_tag"].items():
            b = per_tag.setdefault(t, _zero())
            for c in COUNTERS:
                b[c] += counts[c]
    out["per_tag"] = dict(sorted(per_tag.items()))
    return out
