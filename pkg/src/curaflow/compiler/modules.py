"""Physical module implementations.

Every implementation is callable as ``impl(value, context=None)``. The
``context`` argument carries connector output (rendered table text) to LLM
modules; other kinds ignore it or hand it to scripts as ``context``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from curaflow.llm.base import Backend, LlmRequest
from curaflow.model import CostLedger, ModuleDescriptor, Table, dumps, from_json, normalize_text, type_tag
from curaflow.script import Limits, Script, ToolRegistry, evaluate
from curaflow.script.regex import RegexError, regex_match


class ModuleFailure(RuntimeError):
    """A module could not produce an output for its input."""


class LlmOutputError(ModuleFailure):
    def __init__(self, tag: str, reason: str, text: str):
        super().__init__(f"{tag}: unusable LLM answer ({reason}): {text[:200]!r}")
        self.tag = tag
        self.reason = reason
        self.text = text


class DataExposureError(ModuleFailure):
    """Raised when raw table data would be placed into an LLM prompt."""


def contains_table(value: Any) -> bool:
    if isinstance(value, Table):
        return True
    if isinstance(value, (list, tuple)):
        return any(contains_table(v) for v in value)
    if isinstance(value, Mapping):
        return any(contains_table(v) for v in value.values())
    return False


def render_value(value: Any) -> str:
    """Text form of a value inside a prompt: text as-is, others as canonical JSON."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return dumps(value)


# --------------------------------------------------------------------------
# output parsing and validation rules

PARSE_MODES = ("text", "json", "int", "float", "bool", "list")
_TRUE = {"true", "yes", "y", "match", "1"}
_FALSE = {"false", "no", "n", "non-match", "nonmatch", "no match", "0"}


class _Unusable(Exception):
    pass


def parse_output(text: str, mode: str) -> Any:
    t = text.strip()
    if mode == "text":
        return t
    if mode == "bool":
        word = t.strip(" .!\"'`").lower()
        if word in _TRUE:
            return True
        if word in _FALSE:
            return False
        raise _Unusable("expected yes/no")
    if mode == "int":
        try:
            return int(t.rstrip("."))
        except ValueError:
            raise _Unusable("expected an integer") from None
    if mode == "float":
        try:
            return float(t)
        except ValueError:
            raise _Unusable("expected a number") from None
    if mode == "json":
        try:
            return from_json(json.loads(t))
        except ValueError as exc:
            raise _Unusable(f"invalid JSON: {exc}") from None
    if mode == "list":
        if t.strip(" .").lower() in ("", "none"):
            return []
        if t.startswith("["):
            try:
                out = json.loads(t)
            except ValueError as exc:
                raise _Unusable(f"invalid JSON list: {exc}") from None
            if not isinstance(out, list):
                raise _Unusable("expected a list")
            return out
        parts = re.split(r"[\n,;]", t)
        return [p.strip(" -*\t") for p in parts if p.strip(" -*\t")]
    raise ValueError(f"unknown parse mode {mode!r}")


@dataclass(frozen=True)
class OutputRule:
    """Declared check on an LLM answer: numeric_range, one_of or regex."""

    kind: str
    args: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "OutputRule":
        m = re.fullmatch(r"\s*(numeric_range|one_of|regex)\s*\((.*)\)\s*", text, re.S)
        if not m:
            raise ValueError(f"bad validation rule {text!r}; use numeric_range(lo,hi), one_of(a,b,...) or regex(p)")
        kind, body = m.groups()
        if kind == "regex":
            try:
                regex_match("", body)
            except RegexError as exc:
                raise ValueError(f"bad rule pattern: {exc}") from None
            return cls(kind, (body,))
        parts = [p.strip().strip("\"'") for p in body.split(",")]
        if kind == "numeric_range":
            if len(parts) != 2:
                raise ValueError("numeric_range takes two bounds")
            lo, hi = float(parts[0]), float(parts[1])
            if lo > hi:
                raise ValueError("numeric_range lower bound exceeds upper bound")
            return cls(kind, (lo, hi))
        labels = tuple(p for p in parts if p)
        if not labels:
            raise ValueError("one_of needs at least one label")
        return cls(kind, labels)

    def violation(self, value: Any) -> str | None:
        if self.kind == "numeric_range":
            lo, hi = self.args
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return f"expected a number in [{lo:g}, {hi:g}], got {type_tag(value)}"
            if not lo <= value <= hi:
                return f"{value} is outside [{lo:g}, {hi:g}]"
            return None
        text = render_value(value)
        if self.kind == "one_of":
            if normalize_text(text) not in {normalize_text(x) for x in self.args}:
                return f"answer must be one of {', '.join(self.args)}"
            return None
        if not regex_match(text, self.args[0]):
            return f"answer must match /{self.args[0]}/"
        return None

    def __str__(self):
        if self.kind == "numeric_range":
            return f"numeric_range({self.args[0]:g},{self.args[1]:g})"
        return f"{self.kind}({','.join(self.args)})"


# --------------------------------------------------------------------------
# implementations

_PLACEHOLDER = re.compile(r"\{\{\s*(input(?:\.[A-Za-z_]\w*)*|context)\s*\}\}")


def render_prompt(template: str, value: Any, context: str | None = None) -> str:
    def sub(m: re.Match) -> str:
        path = m.group(1)
        if path == "context":
            return context or ""
        v = value
        for part in path.split(".")[1:]:
            v = v.get(part) if isinstance(v, Mapping) else None
        return render_value(v)

    out = _PLACEHOLDER.sub(sub, template)
    if not re.search(r"\{\{\s*input", template):
        out += "\n\nInput: " + render_value(value)
    if context and not re.search(r"\{\{\s*context\s*\}\}", template):
        out += "\n\nData:\n" + context
    return out


@dataclass
class CustomImpl:
    name: str
    fn: Callable[[Any], Any]
    args: dict = field(default_factory=dict)
    kind = "custom"

    def __call__(self, value: Any, context: Any = None) -> Any:
        return self.fn(value)

    def source(self) -> str:
        return self.name


@dataclass
class LlmImpl:
    tag: str
    prompt: str
    backend: Backend
    ledger: CostLedger
    parse: str = "text"
    rule: OutputRule | None = None
    system: str = ""
    temperature: float = 0.0
    max_tokens: int = 1024
    kind = "llm"

    def __post_init__(self):
        if self.parse not in PARSE_MODES:
            raise ValueError(f"unknown parse mode {self.parse!r}")

    def _check(self, text: str) -> tuple[Any, str | None]:
        try:
            value = parse_output(text, self.parse)
        except _Unusable as exc:
            return None, str(exc)
        if self.rule is not None:
            return value, self.rule.violation(value)
        return value, None

    def __call__(self, value: Any, context: Any = None) -> Any:
        if contains_table(value):
            raise DataExposureError(f"{self.tag}: LLM modules do not accept raw tables; use a connector")
        prompt = render_prompt(self.prompt, value, context if isinstance(context, str) else None)
        kw = {"tag": self.tag, "system": self.system, "temperature": self.temperature, "max_tokens": self.max_tokens}
        first = self.backend.complete(LlmRequest.user(prompt, **kw), self.ledger)
        out, why = self._check(first.text)
        if why is None:
            return out
        retry = LlmRequest(
            messages=(
                ("user", prompt),
                ("assistant", first.text),
                ("user", f"Your answer was rejected: {why}. Reply with a corrected answer only."),
            ),
            **kw,
        )
        second = self.backend.complete(retry, self.ledger)
        out, why = self._check(second.text)
        if why is not None:
            raise LlmOutputError(self.tag, why, second.text)
        return out

    def source(self) -> str:
        return self.prompt

    def with_prompt(self, prompt: str) -> "LlmImpl":
        return LlmImpl(self.tag, prompt, self.backend, self.ledger, self.parse, self.rule, self.system, self.temperature, self.max_tokens)


@dataclass
class ScriptImpl:
    script: Script
    registry: ToolRegistry
    limits: Limits
    ledger: CostLedger
    origin: Any = None  # GenerationSpec for generated scripts
    kind = "llmgc"

    def __call__(self, value: Any, context: Any = None) -> Any:
        return evaluate(self.script, value, self.registry, self.limits, self.ledger, context)

    def source(self) -> str:
        return self.script.source

    def with_script(self, script: Script) -> "ScriptImpl":
        return ScriptImpl(script, self.registry, self.limits, self.ledger, self.origin)


@dataclass
class DecoratedImpl:
    """One optimizer layer around an inner module.

    ``hook(inner, value, context)`` implements the layer; ``state`` holds
    whatever the optimizer keeps (a validation report, simulator state, a
    connector with its audit log).
    """

    inner: "PhysicalModule"
    decoration: str
    hook: Callable[["PhysicalModule", Any, Any], Any]
    state: Any = None
    finalizer: Callable[[], None] | None = None
    kind = "decorated"

    def __call__(self, value: Any, context: Any = None) -> Any:
        return self.hook(self.inner, value, context)


@dataclass
class PhysicalModule:
    descriptor: ModuleDescriptor
    impl: Any
    pure: bool = False

    def __call__(self, value: Any, context: Any = None) -> Any:
        return self.impl(value, context)

    @property
    def kind(self) -> str:
        return self.descriptor.kind

    def layers(self) -> list["PhysicalModule"]:
        """Outermost first, ending with the undecorated module."""
        out = [self]
        while isinstance(out[-1].impl, DecoratedImpl):
            out.append(out[-1].impl.inner)
        return out

    def core(self) -> "PhysicalModule":
        return self.layers()[-1]

    def decorations(self) -> list[str]:
        """Decoration kinds, innermost first."""
        return [m.impl.decoration for m in reversed(self.layers()[:-1])]

    def layer(self, decoration: str) -> DecoratedImpl | None:
        for m in self.layers()[:-1]:
            if m.impl.decoration == decoration:
                return m.impl
        return None

    def finalize(self) -> None:
        for m in self.layers():
            if isinstance(m.impl, DecoratedImpl) and m.impl.finalizer is not None:
                m.impl.finalizer()


def decorate(inner: PhysicalModule, decoration: str, hook, state=None, finalizer=None) -> PhysicalModule:
    desc = ModuleDescriptor(
        id=inner.descriptor.id,
        kind="decorated",
        input_shape=inner.descriptor.input_shape,
        output_shape=inner.descriptor.output_shape,
        inner=inner.descriptor,
        decorations=(decoration,),
    )
    impl = DecoratedImpl(inner, decoration, hook, state, finalizer)
    return PhysicalModule(desc, impl, pure=False)
