"""Lexer and parser for the module script language.

Statements::

    let NAME = expr;     NAME = expr;     return expr;
    if (expr) { ... } else { ... }        while (expr) { ... }
    for (NAME in expr) { ... }

Expressions, loosest first: ``c ? a : b``, ``||``, ``&&``, ``== !=``,
``< <= > >=``, ``+ -``, ``* / %``, unary ``! -``, ``.field``. Atoms are
literals (numbers, strings, true, false, null), names, ``[a, b]``,
``{k: v}``, builtin calls ``f(x, ...)`` and ``call("tool", x, ...)``.
"""

from __future__ import annotations

from dataclasses import dataclass

from curaflow.model import INT_MAX
from curaflow.script import ast
from curaflow.script.builtins import BUILTINS

KEYWORDS = {"let", "if", "else", "while", "for", "in", "return", "true", "false", "null"}
OPERATORS = ("==", "!=", "<=", ">=", "&&", "||", "+", "-", "*", "/", "%", "<", ">", "!", "?", ":", ".", ",", ";", "(", ")", "[", "]", "{", "}", "=")
_ESC = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'", "0": "\0"}
RESERVED_NAMES = {"input", "context"}


class ScriptError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


class ScriptParseError(ScriptError):
    pass


@dataclass(frozen=True)
class Tok:
    kind: str
    value: object
    line: int
    col: int

    def describe(self) -> str:
        return "end of script" if self.kind == "EOF" else repr(self.value)


def lex(src: str) -> list[Tok]:
    toks = []
    i, line, col = 0, 1, 1
    n = len(src)

    def step(k: int) -> None:
        nonlocal i, line, col
        for ch in src[i : i + k]:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        i += k

    while i < n:
        c = src[i]
        if c in " \t\r\n":
            step(1)
            continue
        if src.startswith("//", i) or c == "#":
            while i < n and src[i] != "\n":
                step(1)
            continue
        l0, c0 = line, col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            toks.append(Tok("KW" if word in KEYWORDS else "IDENT", word, l0, c0))
            step(j - i)
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            is_float = False
            if j + 1 < n and src[j] == "." and src[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            text = src[i:j]
            if is_float:
                value: object = float(text)
            else:
                value = int(text)
            toks.append(Tok("NUM", value, l0, c0))
            step(j - i)
            continue
        if c in "\"'":
            j = i + 1
            buf = []
            while True:
                if j >= n or src[j] == "\n":
                    raise ScriptParseError("unterminated string", l0, c0)
                ch = src[j]
                if ch == c:
                    break
                if ch == "\\":
                    if j + 1 >= n:
                        raise ScriptParseError("unterminated string", l0, c0)
                    e = src[j + 1]
                    if e in _ESC:
                        buf.append(_ESC[e])
                        j += 2
                        continue
                    hexs = src[j + 2 : j + 6]
                    if e == "u" and len(hexs) == 4 and all(h in "0123456789abcdefABCDEF" for h in hexs):
                        buf.append(chr(int(hexs, 16)))
                        j += 6
                        continue
                    raise ScriptParseError(f"bad escape \\{e}", l0, c0)
                buf.append(ch)
                j += 1
            toks.append(Tok("STR", "".join(buf), l0, c0))
            step(j + 1 - i)
            continue
        for op in OPERATORS:
            if src.startswith(op, i):
                toks.append(Tok("OP", op, l0, c0))
                step(len(op))
                break
        else:
            raise ScriptParseError(f"unexpected character {c!r}", l0, c0)
    toks.append(Tok("EOF", None, line, col))
    return toks


_BINARY_LEVELS = [("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*", "/", "%")]


class _ScriptParser:
    def __init__(self, src: str):
        self.toks = lex(src)
        self.pos = 0
        self.declared: set[str] = set(RESERVED_NAMES)

    @property
    def tok(self) -> Tok:
        return self.toks[self.pos]

    def fail(self, expected: str, tok: Tok | None = None) -> ScriptParseError:
        t = tok or self.tok
        return ScriptParseError(f"expected {expected}, found {t.describe()}", t.line, t.col)

    def at_op(self, *ops: str) -> bool:
        return self.tok.kind == "OP" and self.tok.value in ops

    def at_kw(self, kw: str) -> bool:
        return self.tok.kind == "KW" and self.tok.value == kw

    def op(self, o: str) -> Tok:
        if not self.at_op(o):
            raise self.fail(repr(o))
        t = self.tok
        self.pos += 1
        return t

    def name(self) -> Tok:
        if self.tok.kind != "IDENT":
            raise self.fail("a name")
        t = self.tok
        self.pos += 1
        return t

    # statements

    def program(self) -> tuple:
        stmts = []
        while self.tok.kind != "EOF":
            stmts.append(self.statement())
        return tuple(stmts)

    def block(self) -> tuple:
        self.op("{")
        stmts = []
        while not self.at_op("}"):
            if self.tok.kind == "EOF":
                raise self.fail("'}'")
            stmts.append(self.statement())
        self.pos += 1
        return tuple(stmts)

    def statement(self):
        t = self.tok
        loc = {"line": t.line, "col": t.col}
        if self.at_kw("let"):
            self.pos += 1
            name = self.name()
            if name.value in RESERVED_NAMES:
                raise ScriptParseError(f"cannot rebind {name.value!r}", name.line, name.col)
            self.op("=")
            value = self.expr()
            self.op(";")
            self.declared.add(name.value)
            return ast.Let(name.value, value, **loc)
        if self.at_kw("if"):
            self.pos += 1
            self.op("(")
            test = self.expr()
            self.op(")")
            body = self.block()
            orelse: tuple = ()
            if self.at_kw("else"):
                self.pos += 1
                orelse = (self.statement(),) if self.at_kw("if") else self.block()
            return ast.If(test, body, orelse, **loc)
        if self.at_kw("while"):
            self.pos += 1
            self.op("(")
            test = self.expr()
            self.op(")")
            return ast.While(test, self.block(), **loc)
        if self.at_kw("for"):
            self.pos += 1
            self.op("(")
            var = self.name()
            if var.value in RESERVED_NAMES:
                raise ScriptParseError(f"cannot rebind {var.value!r}", var.line, var.col)
            if not self.at_kw("in"):
                raise self.fail("'in'")
            self.pos += 1
            iterable = self.expr()
            self.op(")")
            self.declared.add(var.value)
            return ast.For(var.value, iterable, self.block(), **loc)
        if self.at_kw("return"):
            self.pos += 1
            value = self.expr()
            self.op(";")
            return ast.Return(value, **loc)
        if t.kind == "IDENT" and self.toks[self.pos + 1].kind == "OP" and self.toks[self.pos + 1].value == "=":
            self.pos += 2
            if t.value in RESERVED_NAMES:
                raise ScriptParseError(f"cannot assign to {t.value!r}", t.line, t.col)
            if t.value not in self.declared:
                raise ScriptParseError(f"assignment to undeclared name {t.value!r} (use let)", t.line, t.col)
            value = self.expr()
            self.op(";")
            return ast.Assign(t.value, value, **loc)
        raise self.fail("a statement")

    # expressions

    def expr(self):
        test = self.binary(0)
        if self.at_op("?"):
            t = self.tok
            self.pos += 1
            then = self.expr()
            self.op(":")
            orelse = self.expr()
            return ast.Cond(test, then, orelse, line=t.line, col=t.col)
        return test

    def binary(self, level: int):
        if level == len(_BINARY_LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        while self.at_op(*_BINARY_LEVELS[level]):
            t = self.tok
            self.pos += 1
            right = self.binary(level + 1)
            left = ast.Binary(t.value, left, right, line=t.line, col=t.col)
        return left

    def unary(self):
        if self.at_op("!", "-"):
            t = self.tok
            self.pos += 1
            return ast.Unary(t.value, self.unary(), line=t.line, col=t.col)
        return self.postfix()

    def postfix(self):
        node = self.primary()
        while self.at_op("."):
            self.pos += 1
            name = self.name()
            node = ast.Field(node, name.value, line=name.line, col=name.col)
        return node

    def primary(self):
        t = self.tok
        loc = {"line": t.line, "col": t.col}
        if t.kind == "NUM":
            self.pos += 1
            if isinstance(t.value, int) and t.value > INT_MAX:
                raise ScriptParseError("integer literal out of range", t.line, t.col)
            return ast.Lit(t.value, **loc)
        if t.kind == "STR":
            self.pos += 1
            return ast.Lit(t.value, **loc)
        if t.kind == "KW" and t.value in ("true", "false", "null"):
            self.pos += 1
            return ast.Lit({"true": True, "false": False, "null": None}[t.value], **loc)
        if self.at_op("("):
            self.pos += 1
            inner = self.expr()
            self.op(")")
            return inner
        if self.at_op("["):
            self.pos += 1
            items = self.items("]")
            return ast.ListLit(tuple(items), **loc)
        if self.at_op("{"):
            self.pos += 1
            fields = []
            seen = set()
            while not self.at_op("}"):
                k = self.tok
                if k.kind in ("IDENT", "STR", "KW"):
                    key = k.value
                    self.pos += 1
                else:
                    raise self.fail("a field name")
                if not key or key in seen or key.startswith("__"):
                    raise ScriptParseError(f"bad or duplicate field name {key!r}", k.line, k.col)
                seen.add(key)
                self.op(":")
                fields.append((key, self.expr()))
                if not self.at_op(","):
                    break
                self.pos += 1
            self.op("}")
            return ast.RecordLit(tuple(fields), **loc)
        if t.kind == "IDENT":
            self.pos += 1
            if self.at_op("("):
                self.pos += 1
                args = self.items(")")
                if t.value == "call":
                    if not args or not (isinstance(args[0], ast.Lit) and isinstance(args[0].value, str)):
                        raise ScriptParseError("call() needs a tool name string first", t.line, t.col)
                    return ast.ToolCall(args[0].value, tuple(args[1:]), **loc)
                spec = BUILTINS.get(t.value)
                if spec is None:
                    raise ScriptParseError(f"unknown function {t.value!r}", t.line, t.col)
                lo, hi = spec.arity
                if not (lo <= len(args) and (hi is None or len(args) <= hi)):
                    raise ScriptParseError(f"{t.value}() takes {spec.arity_text} argument(s), got {len(args)}", t.line, t.col)
                return ast.Call(t.value, tuple(args), **loc)
            if t.value not in self.declared:
                raise ScriptParseError(f"undefined name {t.value!r}", t.line, t.col)
            return ast.Var(t.value, **loc)
        raise self.fail("an expression")

    def items(self, close: str) -> list:
        out = []
        while not self.at_op(close):
            out.append(self.expr())
            if not self.at_op(","):
                break
            self.pos += 1
        self.op(close)
        return out


@dataclass(frozen=True)
class Script:
    source: str
    body: tuple

    def __str__(self):
        return self.source


def parse_script(source: str) -> Script:
    p = _ScriptParser(source)
    return Script(source, p.program())
