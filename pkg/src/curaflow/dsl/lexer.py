from __future__ import annotations

from dataclasses import dataclass

KEYWORDS = {"pipeline", "param", "node", "with", "true", "false"}
PUNCT = ("->", "${", "{", "}", "(", ")", "[", "]", ",", ";", ":", "=")

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'", "0": "\0"}


class ParseError(Exception):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT KEYWORD STRING NUMBER PUNCT EOF
    value: object
    line: int
    col: int
    text: str = ""

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        if self.kind == "STRING":
            return "string literal"
        return repr(self.text)


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for ch in source[i : i + k]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += k

    while i < n:
        ch = source[i]
        if ch in " \t\r\n﻿":
            advance(1)
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                advance(1)
            continue
        start_line, start_col = line, col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            kind = "KEYWORD" if word in KEYWORDS else "IDENT"
            toks.append(Token(kind, word, start_line, start_col, word))
            advance(j - i)
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and source[i + 1].isdigit()):
            j = i + 1
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            value = float(text) if is_float else int(text)
            toks.append(Token("NUMBER", value, start_line, start_col, text))
            advance(j - i)
            continue
        if ch == '"':
            value, length = _read_string(source, i, start_line, start_col)
            toks.append(Token("STRING", value, start_line, start_col, source[i : i + length]))
            advance(length)
            continue
        for p in PUNCT:
            if source.startswith(p, i):
                toks.append(Token("PUNCT", p, start_line, start_col, p))
                advance(len(p))
                break
        else:
            raise ParseError(start_line, start_col, f"unexpected character {ch!r}")
    toks.append(Token("EOF", None, line, col))
    return toks


def _read_string(src: str, i: int, line: int, col: int) -> tuple[str, int]:
    """Decode the string literal starting at ``src[i]``; return (value, length)."""
    triple = src.startswith('"""', i)
    j = i + (3 if triple else 1)
    out = []
    while True:
        if j >= len(src):
            raise ParseError(line, col, "unterminated string literal")
        ch = src[j]
        if triple and src.startswith('"""', j):
            return "".join(out), j + 3 - i
        if not triple and ch == '"':
            return "".join(out), j + 1 - i
        if not triple and ch == "\n":
            raise ParseError(line, col, "newline in string literal (use triple quotes)")
        if ch == "\\":
            if j + 1 >= len(src):
                raise ParseError(line, col, "unterminated string literal")
            esc = src[j + 1]
            if esc in _ESCAPES:
                out.append(_ESCAPES[esc])
                j += 2
            elif esc == "u":
                digits = src[j + 2 : j + 6]
                if len(digits) != 4 or any(c not in "0123456789abcdefABCDEF" for c in digits):
                    raise ParseError(line, col, "bad \\u escape")
                out.append(chr(int(digits, 16)))
                j += 6
            else:
                raise ParseError(line, col, f"unknown escape \\{esc}")
            continue
        out.append(ch)
        j += 1


def quote(text: str) -> str:
    """Inverse of the string-literal reader, always single-line."""
    out = ['"']
    for ch in text:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\0":
            out.append("\\0")
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)
