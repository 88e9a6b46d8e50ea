"""Local learners that imitate an expensive module.

``MemoLearner`` remembers exact input/output pairs. ``HashedLogReg`` is an
online logistic regression over signed, hashed character trigrams of the
input's canonical JSON, binary or one-vs-rest over a fixed label space.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from curaflow.model import InvalidValue, check_value, dumps, from_json, to_json, value_equal

DIM = 2**18
LEARNING_RATE = 0.1


class LearnerShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Prediction:
    value: Any
    probability: float
    abstain: bool = False


ABSTAIN = Prediction(None, 0.0, abstain=True)


def canonical(x: Any) -> str:
    try:
        check_value(x)
        return dumps(x)
    except (InvalidValue, ValueError, TypeError) as exc:
        raise LearnerShapeError(f"cannot featurize input: {exc}") from None


class MemoLearner:
    kind = "memo"

    def __init__(self, table: dict[str, Any] | None = None):
        self.table: dict[str, Any] = dict(table or {})

    def predict(self, x: Any) -> Prediction:
        key = canonical(x)
        if key in self.table:
            return Prediction(self.table[key], 1.0)
        return ABSTAIN

    def update(self, x: Any, y: Any) -> None:
        self.table[canonical(x)] = y

    def confident(self, pred: Prediction, gate: float) -> bool:
        return not pred.abstain

    def params(self) -> dict:
        return {"table": {k: to_json(v) for k, v in sorted(self.table.items())}}

    @classmethod
    def from_params(cls, params: Mapping) -> "MemoLearner":
        return cls({k: from_json(v) for k, v in params["table"].items()})


def features(x: Any, dim: int = DIM) -> dict[int, float]:
    """L2-normalized signed hashed trigram counts of the canonical JSON."""
    text = canonical(x)
    grams = [text[i : i + 3] for i in range(len(text) - 2)] or [text]
    out: dict[int, float] = {}
    for g in grams:
        h = int.from_bytes(hashlib.blake2b(g.encode("utf-8"), digest_size=8).digest(), "big")
        idx = h % dim
        sign = 1.0 if (h >> 63) & 1 else -1.0
        out[idx] = out.get(idx, 0.0) + sign
    norm = math.sqrt(sum(v * v for v in out.values()))
    if norm == 0:
        return {}
    return {k: v / norm for k, v in sorted(out.items()) if v != 0}


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def logistic_loss(w: Mapping[int, float], b: float, x: Mapping[int, float], y: float) -> float:
    z = b + sum(w.get(i, 0.0) * v for i, v in x.items())
    # log(1 + e^z) - y z, written to stay finite for large |z|
    return max(z, 0.0) + math.log1p(math.exp(-abs(z))) - y * z


def logistic_grad(w: Mapping[int, float], b: float, x: Mapping[int, float], y: float) -> tuple[dict[int, float], float]:
    p = sigmoid(b + sum(w.get(i, 0.0) * v for i, v in x.items()))
    g = p - y
    return {i: g * v for i, v in x.items()}, g


class HashedLogReg:
    kind = "hashed_logreg"

    def __init__(self, labels: Sequence[Any], lr: float = LEARNING_RATE, dim: int = DIM):
        labels = list(labels)
        if len(labels) < 2:
            raise ValueError("hashed_logreg needs a label space of at least two values")
        self.labels = labels
        self.lr = lr
        self.dim = dim
        n = 1 if len(labels) == 2 else len(labels)
        self.weights: list[dict[int, float]] = [{} for _ in range(n)]
        self.bias: list[float] = [0.0] * n

    def _index(self, y: Any) -> int:
        for i, lab in enumerate(self.labels):
            if value_equal(lab, y):
                return i
        raise LearnerShapeError(f"output {dumps(y)} is not in the label space")

    def probabilities(self, x: Any) -> list[float]:
        f = features(x, self.dim)
        ps = [sigmoid(b + sum(w.get(i, 0.0) * v for i, v in f.items())) for w, b in zip(self.weights, self.bias)]
        if len(self.labels) == 2:
            return [1.0 - ps[0], ps[0]]
        return ps

    def predict(self, x: Any) -> Prediction:
        ps = self.probabilities(x)
        k = max(range(len(ps)), key=lambda i: (ps[i], -i))
        return Prediction(self.labels[k], ps[k])

    def update(self, x: Any, y: Any) -> None:
        k = self._index(y)
        f = features(x, self.dim)
        targets = [1.0 if k == 1 else 0.0] if len(self.labels) == 2 else [1.0 if i == k else 0.0 for i in range(len(self.labels))]
        for c, t in enumerate(targets):
            gw, gb = logistic_grad(self.weights[c], self.bias[c], f, t)
            w = self.weights[c]
            for i, g in gw.items():
                w[i] = w.get(i, 0.0) - self.lr * g
            self.bias[c] -= self.lr * gb

    def confident(self, pred: Prediction, gate: float) -> bool:
        return abs(pred.probability - 0.5) >= gate

    def params(self) -> dict:
        return {
            "labels": [to_json(v) for v in self.labels],
            "lr": self.lr,
            "dim": self.dim,
            "weights": [{str(i): v for i, v in sorted(w.items())} for w in self.weights],
            "bias": list(self.bias),
        }

    @classmethod
    def from_params(cls, params: Mapping) -> "HashedLogReg":
        m = cls([from_json(v) for v in params["labels"]], params["lr"], params["dim"])
        m.weights = [{int(i): float(v) for i, v in w.items()} for w in params["weights"]]
        m.bias = [float(b) for b in params["bias"]]
        return m


def make_learner(kind: str, labels: Sequence[Any] | None = None):
    if kind == "memo":
        return MemoLearner()
    if kind == "hashed_logreg":
        if not labels:
            raise ValueError("hashed_logreg requires a label space")
        return HashedLogReg(labels)
    raise ValueError(f"unknown learner {kind!r}")


def learner_from_params(kind: str, params: Mapping):
    if kind == "memo":
        return MemoLearner.from_params(params)
    if kind == "hashed_logreg":
        return HashedLogReg.from_params(params)
    raise ValueError(f"unknown learner {kind!r}")
