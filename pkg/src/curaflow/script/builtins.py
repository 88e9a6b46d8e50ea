"""Builtin functions available to scripts.

Every builtin receives the evaluation context first. ``map`` and ``filter``
take the name of another builtin to apply, since scripts cannot define
functions: ``map(words, "lower")``, ``filter(words, "contains", "x")``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping

from curaflow.model import type_tag
from curaflow.script import regex


class BuiltinTypeError(Exception):
    """Raised by builtins; the evaluator re-raises it with a source location."""

    def __init__(self, func: str, got: str):
        super().__init__(f"{func}: unsupported argument type(s) {got}")
        self.func = func
        self.got = got


@dataclass(frozen=True)
class Builtin:
    fn: Callable
    arity: tuple[int, int | None]

    @property
    def arity_text(self) -> str:
        lo, hi = self.arity
        if hi == lo:
            return str(lo)
        return f"{lo}+" if hi is None else f"{lo}-{hi}"


def _types(*args: Any) -> str:
    return ", ".join(type_tag(a) for a in args)


def _text(name: str, *args: Any) -> None:
    if not all(isinstance(a, str) for a in args):
        raise BuiltinTypeError(name, _types(*args))


def _lower(ctx, s):
    _text("lower", s)
    return s.lower()


def _upper(ctx, s):
    _text("upper", s)
    return s.upper()


def _trim(ctx, s):
    _text("trim", s)
    return s.strip()


def _split(ctx, s, sep=None):
    if sep is None:
        _text("split", s)
        return ctx.collection(s.split())
    _text("split", s, sep)
    if not sep:
        raise BuiltinTypeError("split", "empty separator")
    return ctx.collection(s.split(sep))


def _join(ctx, items, sep=""):
    if not isinstance(items, (list, tuple)) or not isinstance(sep, str) or not all(isinstance(x, str) for x in items):
        raise BuiltinTypeError("join", _types(items, sep))
    return ctx.text(sep.join(items))


def _contains(ctx, hay, needle):
    if isinstance(hay, str) and isinstance(needle, str):
        return needle in hay
    if isinstance(hay, (list, tuple)):
        return any(ctx.equal(x, needle) for x in hay)
    if isinstance(hay, Mapping) and isinstance(needle, str):
        return needle in hay
    raise BuiltinTypeError("contains", _types(hay, needle))


def _replace(ctx, s, old, new):
    _text("replace", s, old, new)
    if not old:
        raise BuiltinTypeError("replace", "empty search string")
    return ctx.text(s.replace(old, new))


def _regex_match(ctx, s, pattern):
    _text("regex_match", s, pattern)
    return regex.regex_match(s, pattern, ctx.tick)


def _regex_findall(ctx, s, pattern):
    _text("regex_findall", s, pattern)
    return ctx.collection(regex.regex_findall(s, pattern, ctx.tick))


def _len(ctx, x):
    if isinstance(x, (str, list, tuple, Mapping)):
        return len(x)
    raise BuiltinTypeError("len", _types(x))


def _callable_name(ctx, fname: str, where: str) -> str:
    if not isinstance(fname, str) or fname not in BUILTINS or fname in ("map", "filter"):
        raise BuiltinTypeError(where, f"function name {fname!r}")
    return fname


def _map(ctx, items, fname, *extra):
    if not isinstance(items, (list, tuple)):
        raise BuiltinTypeError("map", _types(items))
    fname = _callable_name(ctx, fname, "map")
    return ctx.collection([ctx.apply(fname, (x, *extra)) for x in items])


def _filter(ctx, items, fname, *extra):
    if not isinstance(items, (list, tuple)):
        raise BuiltinTypeError("filter", _types(items))
    fname = _callable_name(ctx, fname, "filter")
    out = []
    for x in items:
        keep = ctx.apply(fname, (x, *extra))
        if not isinstance(keep, bool):
            raise BuiltinTypeError("filter", f"predicate returned {type_tag(keep)}")
        if keep:
            out.append(x)
    return out


def _append(ctx, items, item):
    if not isinstance(items, (list, tuple)):
        raise BuiltinTypeError("append", _types(items, item))
    return ctx.collection([*items, item])


def _get(ctx, coll, key, default=None):
    if isinstance(coll, (list, tuple)) and isinstance(key, int) and not isinstance(key, bool):
        if -len(coll) <= key < len(coll):
            return coll[key]
        return default
    if isinstance(coll, Mapping) and isinstance(key, str):
        return coll.get(key, default)
    if coll is None:
        return default
    raise BuiltinTypeError("get", _types(coll, key))


BUILTINS: dict[str, Builtin] = {
    "lower": Builtin(_lower, (1, 1)),
    "upper": Builtin(_upper, (1, 1)),
    "trim": Builtin(_trim, (1, 1)),
    "split": Builtin(_split, (1, 2)),
    "join": Builtin(_join, (1, 2)),
    "contains": Builtin(_contains, (2, 2)),
    "replace": Builtin(_replace, (3, 3)),
    "regex_match": Builtin(_regex_match, (2, 2)),
    "regex_findall": Builtin(_regex_findall, (2, 2)),
    "len": Builtin(_len, (1, 1)),
    "map": Builtin(_map, (2, None)),
    "filter": Builtin(_filter, (2, None)),
    "append": Builtin(_append, (2, 2)),
    "get": Builtin(_get, (2, 3)),
}

SIGNATURES = {
    "lower": "lower(text) -> text",
    "upper": "upper(text) -> text",
    "trim": "trim(text) -> text",
    "split": "split(text[, sep]) -> list of text (whitespace split when sep omitted)",
    "join": "join(list of text[, sep]) -> text",
    "contains": "contains(text, text) | contains(list, value) | contains(record, name) -> bool",
    "replace": "replace(text, old, new) -> text",
    "regex_match": "regex_match(text, pattern) -> bool (search anywhere)",
    "regex_findall": "regex_findall(text, pattern) -> list of text",
    "len": "len(text | list | record) -> int",
    "map": 'map(list, "builtin", extra...) -> list',
    "filter": 'filter(list, "builtin", extra...) -> list',
    "append": "append(list, value) -> list",
    "get": "get(list, index[, default]) | get(record, name[, default]) -> value",
}
