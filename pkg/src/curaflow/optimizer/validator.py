"""Test-driven repair of generated modules.

Each repair round makes exactly two LLM calls: a reviewer reads the code and
the failing cases and suggests a fix, then a fixer receives code, failures
and suggestion and returns a new version. After ``max_repair_rounds``
unsuccessful rounds a generated script is regenerated from its task and the
repair loop starts over, at most ``max_regenerations`` times.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from curaflow.compiler.generate import GenerationFailed, extract_code, generate_from
from curaflow.compiler.modules import CustomImpl, LlmImpl, PhysicalModule, ScriptImpl
from curaflow.llm.base import Backend, BackendUnavailable, LlmRequest, MockExhausted
from curaflow.model import Comparator, CostLedger, TestCase, dumps, from_json
from curaflow.script import ScriptError, ScriptParseError, ToolError, parse_script

REVIEWER = """\
You are reviewing a module that fails some of its test cases. Explain what
is wrong and how to fix it. Do not write the corrected version."""

FIXER = """\
Rewrite the module so that every test case passes. Apply the suggestion.
Answer with the complete new version inside one fenced code block."""


@dataclass(frozen=True)
class ValidatorConfig:
    cases: tuple[TestCase, ...]
    max_repair_rounds: int = 3
    max_regenerations: int = 2

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(self.cases))
        if self.max_repair_rounds < 1:
            raise ValueError("max_repair_rounds must be at least 1")
        if self.max_regenerations < 0:
            raise ValueError("max_regenerations must be non-negative")
        if not self.cases:
            raise ValueError("a validator needs at least one test case")


@dataclass(frozen=True)
class CaseOutcome:
    index: int
    passed: bool
    actual: Any = None
    error: str | None = None

    def to_json(self) -> dict:
        out = {"index": self.index, "passed": self.passed}
        if self.error is not None:
            out["error"] = self.error
        else:
            out["actual"] = json.loads(dumps(self.actual))
        return out


@dataclass
class ValidationReport:
    status: str
    rounds: list[list[CaseOutcome]] = field(default_factory=list)
    rounds_used: int = 0
    total_rounds: int = 0
    regenerations_used: int = 0
    transcript: list[dict] = field(default_factory=list)
    repairable: bool = True
    llm_calls: int = 0

    @property
    def passed(self) -> bool:
        return self.status == "passed"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "rounds_used": self.rounds_used,
            "total_rounds": self.total_rounds,
            "regenerations_used": self.regenerations_used,
            "repairable": self.repairable,
            "llm_calls": self.llm_calls,
            "rounds": [[o.to_json() for o in r] for r in self.rounds],
            "transcript": self.transcript,
        }

    def summary(self) -> str:
        last = self.rounds[-1] if self.rounds else []
        ok = sum(o.passed for o in last)
        return (
            f"{self.status}: {ok}/{len(last)} cases pass; repair rounds {self.rounds_used} in final cycle "
            f"({self.total_rounds} total), regenerations {self.regenerations_used}, llm calls {self.llm_calls}"
        )


def run_cases(module: PhysicalModule, cases: Sequence[TestCase]) -> list[CaseOutcome]:
    out = []
    for i, case in enumerate(cases):
        try:
            actual = module(case.input)
        except (BackendUnavailable, MockExhausted):
            raise
        except ToolError as exc:
            if isinstance(exc.wrapped, (BackendUnavailable, MockExhausted)):
                raise exc.wrapped from exc
            out.append(CaseOutcome(i, False, error=f"ToolError: {exc}"))
            continue
        except (ScriptError, RuntimeError, ValueError, TypeError) as exc:
            out.append(CaseOutcome(i, False, error=f"{type(exc).__name__}: {exc}"))
            continue
        out.append(CaseOutcome(i, case.passes(actual), actual))
    return out


def render_failures(cases: Sequence[TestCase], outcomes: Sequence[CaseOutcome]) -> str:
    lines = []
    for o in outcomes:
        if o.passed:
            continue
        c = cases[o.index]
        got = o.error if o.error is not None else dumps(o.actual)
        lines.append(f"- input: {dumps(c.input)}\n  expected: {dumps(c.expected)}\n  got: {got}")
    return "\n".join(lines)


def _all_pass(outcomes: Sequence[CaseOutcome]) -> bool:
    return all(o.passed for o in outcomes)


def _revise(module: PhysicalModule, text: str) -> PhysicalModule | None:
    impl = module.impl
    if isinstance(impl, ScriptImpl):
        try:
            return PhysicalModule(module.descriptor, impl.with_script(parse_script(extract_code(text))), module.pure)
        except ScriptParseError:
            return None
    if isinstance(impl, LlmImpl):
        prompt = extract_code(text)
        return PhysicalModule(module.descriptor, impl.with_prompt(prompt), module.pure) if prompt else None
    return None


def _tag(module: PhysicalModule) -> str:
    return module.descriptor.id


def validate_and_repair(
    module: PhysicalModule,
    cfg: ValidatorConfig,
    backend: Backend,
    ledger: CostLedger,
) -> tuple[PhysicalModule, ValidationReport]:
    cases = cfg.cases
    before = ledger.llm_calls
    report = ValidationReport("failed")
    outcomes = run_cases(module, cases)
    report.rounds.append(outcomes)
    impl = module.impl
    if isinstance(impl, CustomImpl) or not isinstance(impl, (ScriptImpl, LlmImpl)):
        report.repairable = False
        report.status = "passed" if _all_pass(outcomes) else "failed"
        return module, report

    tag = _tag(module) + ":repair"
    kind = "code" if isinstance(impl, ScriptImpl) else "prompt"
    while True:
        report.rounds_used = 0
        for r in range(cfg.max_repair_rounds):
            if _all_pass(outcomes):
                break
            failures = render_failures(cases, outcomes)
            source = module.impl.source()
            review_prompt = f"{REVIEWER}\n\nCurrent {kind}:\n```\n{source}\n```\n\nFailing cases:\n{failures}"
            suggestion = backend.complete(LlmRequest.user(review_prompt, tag), ledger).text
            fix_prompt = (
                f"{FIXER}\n\nCurrent {kind}:\n```\n{source}\n```\n\nFailing cases:\n{failures}\n\nSuggestion:\n{suggestion}"
            )
            revised = backend.complete(LlmRequest.user(fix_prompt, tag), ledger).text
            report.rounds_used = r + 1
            report.total_rounds += 1
            report.transcript.append({"round": report.total_rounds, "role": "reviewer", "prompt": review_prompt, "response": suggestion})
            report.transcript.append({"round": report.total_rounds, "role": "fixer", "prompt": fix_prompt, "response": revised})
            candidate = _revise(module, revised)
            if candidate is not None:
                module = candidate
                outcomes = run_cases(module, cases)
            report.rounds.append(outcomes)
        if _all_pass(outcomes):
            report.status = "passed"
            break
        origin = getattr(module.impl, "origin", None)
        if report.regenerations_used >= cfg.max_regenerations or origin is None:
            break
        report.regenerations_used += 1
        try:
            script = generate_from(origin, backend, ledger)
        except GenerationFailed as exc:
            report.transcript.append({"round": report.total_rounds, "role": "generator", "error": str(exc)})
            break
        module = PhysicalModule(module.descriptor, module.impl.with_script(script), module.pure)
        outcomes = run_cases(module, cases)
        report.rounds.append(outcomes)
        report.transcript.append({"round": report.total_rounds, "role": "generator", "response": script.source})
    report.llm_calls = ledger.llm_calls - before
    return module, report


def load_cases(spec: Any, comparator: str | Comparator | None = None) -> list[TestCase]:
    """Cases from a JSON file path, inline JSON text (starting with ``[``) or a list."""
    if isinstance(spec, str):
        text = spec if spec.lstrip().startswith("[") else Path(spec).read_text(encoding="utf-8")
        raw = json.loads(text)
    else:
        raw = spec
    cases = []
    for item in raw:
        if isinstance(item, TestCase):
            cases.append(item)
            continue
        if comparator is not None and "comparator" not in item:
            item = {**item, "comparator": Comparator.coerce(comparator).to_json()}
        cases.append(TestCase.from_json(item))
    return cases


def cases_from_pairs(inputs: Sequence[Any], expected: Sequence[Any], comparator: str | None = None) -> list[TestCase]:
    if len(inputs) != len(expected):
        raise ValueError("inputs and expected differ in length")
    cmp = Comparator.coerce(comparator)
    return [TestCase(from_json(i), from_json(e), cmp) for i, e in zip(inputs, expected)]
