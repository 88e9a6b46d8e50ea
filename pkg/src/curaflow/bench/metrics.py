"""Evaluation metrics for the three benchmark tasks.

Counts are accumulated as integers and ratios computed with Fraction, so a
metric is the float nearest to its exact rational value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

from curaflow.model import NORMALIZED_TEXT, normalize_text, value_equal

TASKS = ("er", "imputation", "ner")


class LengthMismatch(ValueError):
    def __init__(self, predicted: int, gold: int):
        super().__init__(f"{predicted} predictions for {gold} gold labels")
        self.predicted = predicted
        self.gold = gold


@dataclass
class EvalResult:
    task: str
    dataset: str
    n: int
    metrics: dict[str, float]
    counts: dict[str, int] = field(default_factory=dict)
    ledger: dict | None = None
    settings: dict = field(default_factory=dict)  # backend and seed the result was produced with

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        for name, v in self.metrics.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"metric {name}={v} outside [0, 1]")

    @property
    def llm_calls(self) -> int | None:
        return None if self.ledger is None else int(self.ledger["llm_calls"])

    @property
    def calls_per_record(self) -> float | None:
        calls = self.llm_calls
        if calls is None or self.n == 0:
            return None
        return calls / self.n

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "dataset": self.dataset,
            "n": self.n,
            "metrics": dict(self.metrics),
            "counts": dict(self.counts),
            "ledger": self.ledger,
            "settings": dict(self.settings),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EvalResult":
        return cls(obj["task"], obj["dataset"], obj["n"], dict(obj["metrics"]), dict(obj.get("counts", {})), obj.get("ledger"), dict(obj.get("settings", {})))


def _check(predicted: Sequence, gold: Sequence, nonempty: bool = False) -> None:
    if len(predicted) != len(gold):
        raise LengthMismatch(len(predicted), len(gold))
    if nonempty and not gold:
        raise ValueError("nothing to evaluate")


def prf(tp: int, fp: int, fn: int) -> tuple[Fraction, Fraction, Fraction]:
    """Precision, recall and F1; an empty denominator gives 0."""
    p = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    r = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
    return p, r, f1


def eval_er(predictions: Sequence[bool], gold: Sequence[bool], dataset: str = "", ledger: dict | None = None) -> EvalResult:
    _check(predictions, gold, nonempty=True)
    tp = sum(1 for p, g in zip(predictions, gold) if p and g)
    fp = sum(1 for p, g in zip(predictions, gold) if p and not g)
    fn = sum(1 for p, g in zip(predictions, gold) if not p and g)
    p, r, f1 = prf(tp, fp, fn)
    return EvalResult(
        "er",
        dataset,
        len(gold),
        {"precision": float(p), "recall": float(r), "f1": float(f1)},
        {"tp": tp, "fp": fp, "fn": fn, "tn": len(gold) - tp - fp - fn},
        ledger,
    )


def eval_imputation(predicted: Sequence[Any], gold: Sequence[Any], dataset: str = "", ledger: dict | None = None) -> EvalResult:
    _check(predicted, gold)
    correct = sum(1 for p, g in zip(predicted, gold) if value_equal(p, g, NORMALIZED_TEXT))
    acc = Fraction(correct, len(gold)) if gold else Fraction(1)
    return EvalResult("imputation", dataset, len(gold), {"accuracy": float(acc)}, {"correct": correct}, ledger)


def _names(items: Iterable[str]) -> set[str]:
    return {normalize_text(s) for s in items if s is not None and normalize_text(s)}


def eval_ner(predicted: Sequence[Iterable[str]], gold: Sequence[Iterable[str]], dataset: str = "", ledger: dict | None = None) -> EvalResult:
    """Micro-averaged set F1 over normalized names.

    When no document has a predicted or a gold name, prediction and gold
    agree vacuously and all three metrics are 1.
    """
    _check(predicted, gold)
    tp = fp = fn = 0
    for p, g in zip(predicted, gold):
        ps, gs = _names(p), _names(g)
        tp += len(ps & gs)
        fp += len(ps - gs)
        fn += len(gs - ps)
    if tp + fp + fn == 0:
        p = r = f1 = Fraction(1)
    else:
        p, r, f1 = prf(tp, fp, fn)
    return EvalResult(
        "ner",
        dataset,
        len(gold),
        {"precision": float(p), "recall": float(r), "f1": float(f1)},
        {"tp": tp, "fp": fp, "fn": fn},
        ledger,
    )
