"""CSV in and out of Tables, using the stdlib csv dialect machinery."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from curaflow.model import INT_MAX, INT_MIN, Schema, Table, conform, dumps, type_tag


class CsvError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class SchemaMismatch(ValueError):
    def __init__(self, header: list[str], expected: list[str]):
        super().__init__(f"header {header} does not match schema columns {expected}")
        self.header = header
        self.expected = expected


@dataclass(frozen=True)
class CsvOptions:
    delimiter: str = ","
    quotechar: str = '"'
    header: bool = True
    empty_text_is_null: bool = True


_TRUE = {"true", "1", "yes", "t", "y"}
_FALSE = {"false", "0", "no", "f", "n"}


def _coerce(cell: str, tag: str, line: int, column: str, opts: CsvOptions) -> Any:
    if cell == "":
        if tag != "text" or opts.empty_text_is_null:
            return None
        return ""
    try:
        if tag == "text":
            return cell
        if tag == "int":
            v = int(cell.strip())
            if not INT_MIN <= v <= INT_MAX:
                raise ValueError("out of 64-bit range")
            return v
        if tag == "float":
            return float(cell.strip())
        low = cell.strip().lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError("not a boolean")
    except ValueError as exc:
        raise CsvError(line, f"column {column!r}: cannot read {cell!r} as {tag} ({exc})") from None


def parse_csv(text: str, schema: Schema | None = None, options: CsvOptions | None = None) -> Table:
    """Parse CSV text. Without a schema every header column is text."""
    opts = options or CsvOptions()
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=opts.delimiter, quotechar=opts.quotechar, strict=True)
    rows = []
    try:
        records = list(reader)
    except csv.Error as exc:
        raise CsvError(reader.line_num, str(exc)) from None
    start = 0
    if opts.header:
        if not records:
            raise CsvError(1, "missing header row")
        header = [h.strip() for h in records[0]]
        if schema is None:
            schema = Schema(tuple((h, "text") for h in header))
        elif header != schema.names:
            raise SchemaMismatch(header, schema.names)
        start = 1
    elif schema is None:
        raise ValueError("a schema is required when the file has no header")
    names = schema.names
    # csv.reader does not expose per-record line numbers after the fact, so
    # count physical lines consumed by each record instead
    line = 1 + start
    for rec in records[start:]:
        if rec == []:
            line += 1
            continue
        if len(rec) != len(names):
            raise CsvError(line, f"expected {len(names)} fields, found {len(rec)}")
        rows.append({n: _coerce(c, schema.type_of(n), line, n, opts) for n, c in zip(names, rec)})
        line += 1 + sum(c.count("\n") for c in rec)
    return Table(schema, tuple(rows))


def load_csv(path: str | Path, schema: Schema | str | None = None, options: CsvOptions | None = None) -> Table:
    if isinstance(schema, str):
        schema = Schema.parse(schema)
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv(fh.read(), schema, options)


def _cell_text(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def table_to_csv(table: Table, options: CsvOptions | None = None) -> str:
    opts = options or CsvOptions()
    buf = io.StringIO(newline="")
    w = csv.writer(buf, delimiter=opts.delimiter, quotechar=opts.quotechar, lineterminator="\n")
    if opts.header:
        w.writerow(table.schema.names)
    for row in table.rows:
        w.writerow([_cell_text(row.get(n)) for n in table.schema.names])
    return buf.getvalue()


def save_csv(table: Table, path: str | Path, options: CsvOptions | None = None) -> None:
    Path(path).write_text(table_to_csv(table, options), encoding="utf-8", newline="")


def infer_column_type(values: list) -> str:
    tags = {type_tag(v) for v in values if v is not None}
    if tags <= {"int"} and tags:
        return "int"
    if tags <= {"int", "float"} and tags:
        return "float"
    if tags == {"bool"}:
        return "bool"
    return "text"


def as_table(value: Any, column: str = "value") -> Table:
    """Coerce a module output into a Table for saving.

    Records and lists of records become rows; scalars and other lists land in
    a single column named ``column``.
    """
    if isinstance(value, Table):
        return value
    items = list(value) if isinstance(value, (list, tuple)) else [value]
    if items and all(isinstance(x, dict) for x in items):
        names: list[str] = []
        for rec in items:
            for k in rec:
                if k not in names:
                    names.append(k)
        rows = [{n: _scalar(rec.get(n)) for n in names} for rec in items]
    else:
        names = [column]
        rows = [{column: _scalar(x)} for x in items]
    if not names:
        names = [column]
    schema = Schema(tuple((n, infer_column_type([r.get(n) for r in rows])) for n in names))
    rows = [{n: _fit(r.get(n), schema.type_of(n)) for n in names} for r in rows]
    table = Table(schema, tuple(rows))
    assert not conform(table)
    return table


def _scalar(v: Any) -> Any:
    if isinstance(v, (list, tuple, dict, Table)):
        return dumps(v)
    return v


def _fit(v: Any, tag: str) -> Any:
    if v is None:
        return None
    if tag == "text" and not isinstance(v, str):
        return _cell_text(v)
    if tag == "float" and isinstance(v, int):
        return float(v)
    return v
