"""Benchmark reports as markdown tables or JSON."""

from __future__ import annotations

import json
from typing import Sequence

from curaflow.bench.metrics import EvalResult

# Published F1 scores (percent) of the reference systems, by dataset.
ER_BASELINES: dict[str, tuple[str, str, str]] = {
    "BeerAdvo-RateBeer": ("78.8", "94.37", "78.6"),
    "Fodors-Zagats": ("100.0", "100.00", "87.2"),
    "iTunes-Amazon": ("91.2", "97.06", "65.9"),
}
MISSING = "–"
SYSTEM = "curaflow"

ER_HEADER = ("Dataset", "Magellan", "Ditto", "FMs", SYSTEM, "LLM calls", "Calls/record")
IMPUTATION_HEADER = ("Dataset", "Accuracy", "LLM calls", "Calls/record")
NER_HEADER = ("Dataset", "Precision", "Recall", "F1", "LLM calls", "Calls/record")
FORMATS = ("markdown", "json")


def _pct(x: float) -> str:
    return f"{100 * x:.2f}"


def _calls(r: EvalResult) -> tuple[str, str]:
    if r.llm_calls is None:
        return MISSING, MISSING
    ratio = r.calls_per_record
    return str(r.llm_calls), MISSING if ratio is None else f"{ratio:.3f}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines)


def _er_row(r: EvalResult) -> list[str]:
    return [r.dataset or MISSING, *ER_BASELINES.get(r.dataset, (MISSING,) * 3), _pct(r.metrics["f1"]), *_calls(r)]


def _imputation_row(r: EvalResult) -> list[str]:
    return [r.dataset or MISSING, _pct(r.metrics["accuracy"]), *_calls(r)]


def _ner_row(r: EvalResult) -> list[str]:
    m = r.metrics
    return [r.dataset or MISSING, _pct(m["precision"]), _pct(m["recall"]), _pct(m["f1"]), *_calls(r)]


def emit_report(results: Sequence[EvalResult], format: str = "markdown") -> str:
    """Render results; markdown groups them into one table per task.

    Metric cells are percentages. An empty result list yields the header of
    the entity resolution table.
    """
    if format == "json":
        return json.dumps([r.to_json() for r in results], indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if format != "markdown":
        raise ValueError(f"format must be one of {FORMATS}")
    sections = []
    layouts = (("er", ER_HEADER, _er_row), ("imputation", IMPUTATION_HEADER, _imputation_row), ("ner", NER_HEADER, _ner_row))
    for task, header, row in layouts:
        chosen = [r for r in results if r.task == task]
        if chosen or (task == "er" and not results):
            sections.append(_table(header, [row(r) for r in chosen]))
    return "\n\n".join(sections) + "\n"


def parse_report(text: str) -> list[EvalResult]:
    """Inverse of the JSON format of :func:`emit_report`."""
    return [EvalResult.from_json(obj) for obj in json.loads(text)]
