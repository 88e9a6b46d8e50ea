"""Restricted regular expressions matched by a Pike VM.

Supported: literals, ``.``, classes (``[a-z]``, ``[^...]``, ``\\d \\w \\s``
and their negations), groups ``(...)`` / ``(?:...)``, alternation,
``* + ? {m} {m,} {m,n}``, anchors ``^ $``. No backreferences, lookaround,
lazy quantifiers or flags. Matching is leftmost-first like Perl/Python, in
time linear in the subject for a fixed pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

MAX_REPEAT = 1000
MAX_PROGRAM = 20_000


class RegexError(ValueError):
    pass


# -- character predicates ---------------------------------------------------


def _is_word(c: str) -> bool:
    return c.isalnum() or c == "_"


_CLASS_ESCAPES: dict[str, Callable[[str], bool]] = {
    "d": str.isdecimal,
    "D": lambda c: not c.isdecimal(),
    "w": _is_word,
    "W": lambda c: not _is_word(c),
    "s": str.isspace,
    "S": lambda c: not c.isspace(),
}
_CHAR_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "f": "\f", "v": "\v"}
_META = set(".^$*+?{}[]()|\\-/")


@dataclass(frozen=True)
class _Set:
    items: tuple  # chars, (lo, hi) ranges, or predicate callables
    negated: bool = False

    def __call__(self, c: str) -> bool:
        hit = False
        for it in self.items:
            if isinstance(it, str):
                hit = c == it
            elif isinstance(it, tuple):
                hit = it[0] <= c <= it[1]
            else:
                hit = it(c)
            if hit:
                break
        return hit != self.negated


# -- parser: pattern -> tree -------------------------------------------------
# tree nodes: ("char", pred) ("bol",) ("eol",) ("cat", [..]) ("alt", [..])
#             ("rep", node, min, max_or_None) ("empty",)


class _RegexParser:
    def __init__(self, pattern: str):
        self.p = pattern
        self.i = 0

    def peek(self) -> str | None:
        return self.p[self.i] if self.i < len(self.p) else None

    def take(self) -> str:
        c = self.p[self.i]
        self.i += 1
        return c

    def parse(self):
        node = self.alt()
        if self.i != len(self.p):
            raise RegexError(f"unexpected {self.p[self.i]!r} at {self.i}")
        return node

    def alt(self):
        branches = [self.concat()]
        while self.peek() == "|":
            self.take()
            branches.append(self.concat())
        return branches[0] if len(branches) == 1 else ("alt", branches)

    def concat(self):
        items = []
        while self.peek() is not None and self.peek() not in "|)":
            items.append(self.repeat())
        if not items:
            return ("empty",)
        return items[0] if len(items) == 1 else ("cat", items)

    def repeat(self):
        start = self.i
        atom = self.atom()
        quantified = False
        while self.peek() is not None and self.peek() in "*+?{":
            if quantified:
                raise RegexError(f"multiple repeat at {self.i}")
            if atom[0] in ("bol", "eol"):
                raise RegexError(f"nothing to repeat at {start}")
            c = self.take()
            if c == "*":
                atom = ("rep", atom, 0, None)
            elif c == "+":
                atom = ("rep", atom, 1, None)
            elif c == "?":
                atom = ("rep", atom, 0, 1)
            else:
                lo, hi = self.braces()
                atom = ("rep", atom, lo, hi)
            quantified = True
        return atom

    def braces(self) -> tuple[int, int | None]:
        end = self.p.find("}", self.i)
        if end < 0:
            raise RegexError("unterminated {")
        body = self.p[self.i : end]
        self.i = end + 1
        lo_s, comma, hi_s = body.partition(",")
        if not lo_s.isdigit() or (hi_s and not hi_s.isdigit()):
            raise RegexError(f"bad repetition {{{body}}}")
        lo = int(lo_s)
        hi = (int(hi_s) if hi_s else None) if comma else lo
        if lo > MAX_REPEAT or (hi is not None and (hi > MAX_REPEAT or hi < lo)):
            raise RegexError(f"bad repetition bounds {{{body}}}")
        return lo, hi

    def atom(self):
        c = self.take()
        if c == "(":
            if self.p.startswith("?:", self.i):
                self.i += 2
            elif self.peek() == "?":
                raise RegexError("only (?:...) group extensions are supported")
            node = self.alt()
            if self.peek() != ")":
                raise RegexError("missing )")
            self.take()
            return node
        if c == ")":
            raise RegexError("unbalanced )")
        if c in "*+?{":
            raise RegexError(f"nothing to repeat at {self.i - 1}")
        if c == ".":
            return ("char", lambda ch: ch != "\n")
        if c == "^":
            return ("bol",)
        if c == "$":
            return ("eol",)
        if c == "[":
            return ("char", self.char_class())
        if c == "\\":
            return ("char", self.escape(in_class=False))
        return ("char", _literal(c))

    def escape(self, in_class: bool):
        if self.peek() is None:
            raise RegexError("trailing backslash")
        e = self.take()
        if e in _CLASS_ESCAPES:
            return _CLASS_ESCAPES[e]
        if e in _CHAR_ESCAPES:
            return _literal(_CHAR_ESCAPES[e]) if not in_class else _CHAR_ESCAPES[e]
        if e.isdigit():
            raise RegexError("backreferences are not supported")
        if e in _META or not e.isalnum():
            return _literal(e) if not in_class else e
        raise RegexError(f"unsupported escape \\{e}")

    def char_class(self) -> _Set:
        negated = False
        if self.peek() == "^":
            self.take()
            negated = True
        items: list = []
        first = True
        while True:
            c = self.peek()
            if c is None:
                raise RegexError("unterminated character class")
            if c == "]" and not first:
                self.take()
                break
            first = False
            self.take()
            if c == "\\":
                item = self.escape(in_class=True)
            elif c == "[":
                raise RegexError("nested [ in character class")
            else:
                item = c
            if isinstance(item, str) and self.peek() == "-" and self.i + 1 < len(self.p) and self.p[self.i + 1] != "]":
                self.take()
                hi = self.take()
                if hi == "\\":
                    hi = self.escape(in_class=True)
                    if not isinstance(hi, str):
                        raise RegexError("bad range in character class")
                elif hi == "[":
                    raise RegexError("nested [ in character class")
                if hi < item:
                    raise RegexError(f"bad range {item}-{hi}")
                items.append((item, hi))
            else:
                items.append(item)
        return _Set(tuple(items), negated)


def _literal(c: str) -> Callable[[str], bool]:
    return lambda ch: ch == c


# -- compiler: tree -> program ----------------------------------------------
# instructions: ("char", pred) ("split", a, b) ("jmp", a) ("bol",) ("eol",) ("match",)


def _emit(node, prog: list) -> None:
    if len(prog) > MAX_PROGRAM:
        raise RegexError("pattern too large")
    kind = node[0]
    if kind == "char":
        prog.append(("char", node[1]))
    elif kind in ("bol", "eol"):
        prog.append((kind,))
    elif kind == "empty":
        pass
    elif kind == "cat":
        for n in node[1]:
            _emit(n, prog)
    elif kind == "alt":
        jumps = []
        branches = node[1]
        for k, branch in enumerate(branches):
            if k < len(branches) - 1:
                split_at = len(prog)
                prog.append(None)
                _emit(branch, prog)
                jumps.append(len(prog))
                prog.append(None)
                prog[split_at] = ("split", split_at + 1, len(prog))
            else:
                _emit(branch, prog)
        for j in jumps:
            prog[j] = ("jmp", len(prog))
    elif kind == "rep":
        _, sub, lo, hi = node
        for _ in range(lo):
            _emit(sub, prog)
        if hi is None:
            split_at = len(prog)
            prog.append(None)
            _emit(sub, prog)
            prog.append(("jmp", split_at))
            prog[split_at] = ("split", split_at + 1, len(prog))
        else:
            holes = []
            for _ in range(hi - lo):
                holes.append(len(prog))
                prog.append(None)
                _emit(sub, prog)
            for h in holes:
                prog[h] = ("split", h + 1, len(prog))
    else:  # pragma: no cover
        raise AssertionError(kind)


@lru_cache(maxsize=256)
def compile_regex(pattern: str) -> tuple:
    tree = _RegexParser(pattern).parse()
    prog: list = []
    _emit(tree, prog)
    prog.append(("match",))
    return tuple(prog)


# -- Pike VM ------------------------------------------------------------------


def _search(prog: tuple, s: str, pos: int, must_advance: bool, tick: Callable[[], None]):
    """Leftmost-first match starting at or after ``pos``; (start, end) or None."""
    n = len(s)
    matched = None
    clist: list[tuple[int, int]] = []

    def add(lst: list, seen: set, pc: int, start: int, i: int) -> None:
        stack = [pc]
        # explicit stack keeps priority order: push the lower-priority arm first
        while stack:
            pc = stack.pop()
            if pc in seen:
                continue
            seen.add(pc)
            op = prog[pc]
            kind = op[0]
            if kind == "jmp":
                stack.append(op[1])
            elif kind == "split":
                stack.append(op[2])
                stack.append(op[1])
            elif kind == "bol":
                if i == 0:
                    stack.append(pc + 1)
            elif kind == "eol":
                if i == n or (i == n - 1 and s[i] == "\n"):
                    stack.append(pc + 1)
            else:
                lst.append((pc, start))

    seen: set = set()
    for i in range(pos, n + 1):
        tick()
        if matched is None:
            add(clist, seen, 0, i, i)
        if not clist:
            if matched is not None:
                break
            seen = set()
            continue
        nlist: list[tuple[int, int]] = []
        nseen: set = set()
        for pc, start in clist:
            op = prog[pc]
            if op[0] == "match":
                if must_advance and start == pos and i == pos:
                    continue
                matched = (start, i)
                break
            if i < n and op[1](s[i]):
                add(nlist, nseen, pc + 1, start, i + 1)
        clist, seen = nlist, nseen
    return matched


def _noop() -> None:
    pass


def search(pattern: str, s: str, tick: Callable[[], None] = _noop) -> tuple[int, int] | None:
    return _search(compile_regex(pattern), s, 0, False, tick)


def regex_match(s: str, pattern: str, tick: Callable[[], None] = _noop) -> bool:
    """True if ``pattern`` matches anywhere in ``s`` (search semantics)."""
    return search(pattern, s, tick) is not None


def regex_findall(s: str, pattern: str, tick: Callable[[], None] = _noop) -> list[str]:
    """Non-empty, non-overlapping matches scanned left to right."""
    prog = compile_regex(pattern)
    out = []
    pos, must_advance = 0, False
    while pos <= len(s):
        m = _search(prog, s, pos, must_advance, tick)
        if m is None:
            break
        start, end = m
        if end > start:
            out.append(s[start:end])
        must_advance = end == start
        pos = end
    return out
