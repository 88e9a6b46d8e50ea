"""Generation of script modules by prompting an LLM."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from curaflow.llm.base import Backend, LlmRequest
from curaflow.model import CostLedger, TestCase, dumps
from curaflow.script import GRAMMAR, SIGNATURES, Script, ScriptParseError, parse_script

PREAMBLE = """\
Write a program in the small scripting language described below. The
program receives its argument as `input` and must `return` the result.
It cannot define functions, import modules, or touch files or the network;
use only the builtins and tools listed. Answer with the program inside one
fenced code block."""

_FENCE = re.compile(r"```(?:[\w+-]*\n)?(.*?)```", re.S)


class GenerationFailed(RuntimeError):
    def __init__(self, attempts: int, last_error: str, reason: str = "attempts"):
        super().__init__(f"code generation failed after {attempts} attempt(s) ({reason}): {last_error}")
        self.attempts = attempts
        self.last_error = last_error
        self.reason = reason
        self.node: str | None = None


def extract_code(text: str) -> str:
    """The first fenced block of ``text``, or the whole text without one."""
    m = _FENCE.search(text)
    return (m.group(1) if m else text).strip()


def render_examples(examples: Sequence[TestCase]) -> str:
    return "\n".join(f"input: {dumps(c.input)}\noutput: {dumps(c.expected)}" for c in examples)


def build_prompt(task: str, examples: Sequence[TestCase] = (), tools: Sequence[str] = (), guidance: str = "") -> str:
    parts = [PREAMBLE, "Language:\n" + GRAMMAR, "Builtins:\n" + "\n".join(SIGNATURES.values())]
    if tools:
        parts.append("Tools:\n" + "\n".join(tools))
    parts.append("Task:\n" + task.strip())
    if guidance:
        parts.append("Guidance from the developer:\n" + guidance.strip())
    if examples:
        parts.append("Examples:\n" + render_examples(examples))
    return "\n\n".join(parts)


@dataclass
class GenerationSpec:
    """Everything needed to (re)generate a script module."""

    task: str
    tag: str
    examples: list[TestCase] = field(default_factory=list)
    tools: list[str] = field(default_factory=list)
    guidance: str = ""
    max_attempts: int = 3
    deadline: float | None = None  # optional wall-clock cap in seconds


def llmgc_generate(
    task: str,
    examples: Sequence[TestCase],
    tools: Sequence[str],
    backend: Backend,
    ledger: CostLedger,
    max_attempts: int = 3,
    *,
    tag: str = "llmgc:generate",
    guidance: str = "",
    deadline: float | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> Script:
    """Ask the backend for a script, re-prompting with the parse error on failure."""
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    base = build_prompt(task, examples, tools, guidance)
    prompt = base
    start = clock()
    last = ""
    for attempt in range(1, max_attempts + 1):
        if deadline is not None and attempt > 1 and clock() - start > deadline:
            raise GenerationFailed(attempt - 1, last, "deadline")
        reply = backend.complete(LlmRequest.user(prompt, tag), ledger)
        code = extract_code(reply.text)
        try:
            return parse_script(code)
        except ScriptParseError as exc:
            last = str(exc)
            prompt = f"{base}\n\nYour previous program was rejected:\n```\n{code}\n```\nParse error: {last}\nReturn a corrected program."
    raise GenerationFailed(max_attempts, last)


def generate_from(spec: GenerationSpec, backend: Backend, ledger: CostLedger) -> Script:
    return llmgc_generate(
        spec.task,
        spec.examples,
        spec.tools,
        backend,
        ledger,
        spec.max_attempts,
        tag=spec.tag,
        guidance=spec.guidance,
        deadline=spec.deadline,
    )
