"""Registry of hand-written (custom) modules.

A registry entry is a factory: it receives the node's arguments and returns
the module function ``fn(value) -> value``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from curaflow.bench.csvio import CsvOptions, as_table, load_csv, save_csv
from curaflow.model import Schema, Table, dumps

Factory = Callable[..., Callable[[Any], Any]]


@dataclass(frozen=True)
class CustomEntry:
    factory: Factory
    pure: bool = False
    description: str = ""


def _identity() -> Callable[[Any], Any]:
    return lambda v: v


def _load_csv(path: str, schema: str | None = None, delimiter: str = ",", header: bool = True, empty_text_is_null: bool = True):
    opts = CsvOptions(delimiter=delimiter, header=header, empty_text_is_null=empty_text_is_null)
    parsed = Schema.parse(schema) if schema else None

    def run(_value: Any) -> Table:
        return load_csv(path, parsed, opts)

    return run


def _save_csv(path: str, column: str = "value", delimiter: str = ","):
    opts = CsvOptions(delimiter=delimiter)

    def run(value: Any) -> Any:
        table = as_table(value, column)
        if column != "value" and len(table.schema.columns) == 1:
            # a single streamed column is named after its node; honour the requested name
            (old, typ), = table.schema.columns
            table = Table(Schema.of((column, typ)), tuple({column: r[old]} for r in table.rows))
        save_csv(table, path, opts)
        return value

    return run


def _save_json(path: str):
    def run(value: Any) -> Any:
        Path(path).write_text(dumps(value) + "\n", encoding="utf-8")
        return value

    return run


def describe_entity(row: dict, skip: tuple[str, ...] = ()) -> str:
    """``"name: Kona; brewery: Big Wave"`` with missing cells left out."""
    parts = [f"{k}: {v}" for k, v in row.items() if k not in skip and v is not None]
    return "; ".join(parts)


def _load_pairs(pairs: str, left: str = "", right: str = "", key: str = "id"):
    """Join a pair list (left_id, right_id[, label]) with the two entity tables.

    Entity tables default to ``left.csv`` / ``right.csv`` beside the pair
    list. The gold label is deliberately dropped so it never reaches a prompt.
    """
    folder = Path(pairs).parent
    left = left or str(folder / "left.csv")
    right = right or str(folder / "right.csv")

    def run(_value: Any) -> Table:
        p = load_csv(pairs)
        lt = {r[key]: r for r in load_csv(left).rows}
        rt = {r[key]: r for r in load_csv(right).rows}
        schema = Schema.of(("left_id", "text"), ("right_id", "text"), ("left", "text"), ("right", "text"))
        rows = []
        for i, r in enumerate(p.rows):
            lid, rid = r["left_id"], r["right_id"]
            if lid not in lt or rid not in rt:
                raise KeyError(f"pair {i}: unknown entity id {lid if lid not in lt else rid!r}")
            rows.append(
                {
                    "left_id": lid,
                    "right_id": rid,
                    "left": describe_entity(lt[lid], (key,)),
                    "right": describe_entity(rt[rid], (key,)),
                }
            )
        return Table(schema, tuple(rows))

    return run


def _field(name: str):
    def run(value: Any) -> Any:
        if not isinstance(value, dict):
            raise TypeError(f"field {name!r}: expected a record")
        return value.get(name)

    return run


BUILTIN_CUSTOMS: dict[str, CustomEntry] = {
    "identity": CustomEntry(_identity, pure=True, description="returns its input unchanged"),
    "load_csv": CustomEntry(_load_csv, description="read a CSV file (path, schema) into a table"),
    "save_csv": CustomEntry(_save_csv, description="write the input as CSV (path) and pass it on"),
    "save_json": CustomEntry(_save_json, description="write the input as canonical JSON (path) and pass it on"),
    "load_pairs": CustomEntry(_load_pairs, description="join an ER pair list with its two entity tables"),
    "field": CustomEntry(_field, pure=True, description="extract one field (name) of a record"),
}


class CustomRegistry:
    def __init__(self, entries: dict[str, CustomEntry] | None = None, include_builtins: bool = True):
        self.entries: dict[str, CustomEntry] = dict(BUILTIN_CUSTOMS) if include_builtins else {}
        self.entries.update(entries or {})

    def register(self, name: str, factory: Factory, pure: bool = False, description: str = "") -> None:
        self.entries[name] = CustomEntry(factory, pure, description)

    def get(self, name: str) -> CustomEntry | None:
        return self.entries.get(name)

    def names(self) -> list[str]:
        return sorted(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self.entries
