"""Distilling an expensive module into a local learner.

In shadow mode the teacher answers every input; the learner first predicts
(when it can), the prediction is scored against the teacher, and then the
learner trains on the pair. Once a full window of scored predictions
reaches the agreement threshold the simulator takes over: confident
predictions are returned without calling the teacher, the rest fall back to
it and keep being scored. If agreement drops below the threshold the
simulator returns to shadow mode.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from curaflow.model import NORMALIZED_TEXT, CostLedger, from_json, value_equal
from curaflow.optimizer.learner import learner_from_params, make_learner


@dataclass(frozen=True)
class SimulatorConfig:
    learner: str = "memo"
    window: int = 200
    threshold: float = 0.95
    gate: float = 0.3
    labels: tuple | None = None

    def __post_init__(self):
        if self.learner not in ("memo", "hashed_logreg"):
            raise ValueError(f"unknown learner {self.learner!r}")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must be in (0, 1]")
        if not 0 <= self.gate < 0.5:
            raise ValueError("gate must be in [0, 0.5)")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.learner == "hashed_logreg" and not self.labels:
            raise ValueError("hashed_logreg needs a label space")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))


@dataclass
class SimulatorState:
    mode: str
    buffer: deque
    learner: Any
    counters: dict = field(default_factory=lambda: {"teacher_calls": 0, "student_calls": 0, "fallbacks": 0})
    events: list = field(default_factory=list)
    steps: int = 0

    @classmethod
    def fresh(cls, cfg: SimulatorConfig) -> "SimulatorState":
        return cls("shadow", deque(maxlen=cfg.window), make_learner(cfg.learner, cfg.labels))

    def agreement(self) -> float:
        return sum(self.buffer) / len(self.buffer) if self.buffer else 0.0

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "buffer": [bool(b) for b in self.buffer],
            "counters": dict(self.counters),
            "learner": {"kind": self.learner.kind, "params": self.learner.params()},
            "events": list(self.events),
            "steps": self.steps,
        }

    @classmethod
    def from_json(cls, obj: dict, cfg: SimulatorConfig) -> "SimulatorState":
        lk = obj["learner"]
        if lk["kind"] != cfg.learner:
            raise ValueError(f"checkpoint holds a {lk['kind']} learner, config asks for {cfg.learner}")
        return cls(
            mode=obj["mode"],
            buffer=deque(obj["buffer"], maxlen=cfg.window),
            learner=learner_from_params(lk["kind"], lk["params"]),
            counters=dict(obj["counters"]),
            events=list(obj.get("events", [])),
            steps=int(obj.get("steps", 0)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, cfg: SimulatorConfig) -> "SimulatorState":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")), cfg)


def _agree(pred: Any, truth: Any) -> bool:
    return value_equal(pred, truth, NORMALIZED_TEXT)


def _transition(state: SimulatorState, to: str) -> None:
    state.events.append(
        {"step": state.steps, "from": state.mode, "to": to, "agreement": state.agreement(), "window": len(state.buffer)}
    )
    state.mode = to


def _score(state: SimulatorState, pred, truth: Any) -> None:
    if not pred.abstain:
        state.buffer.append(_agree(pred.value, truth))


def simulator_step(
    state: SimulatorState,
    cfg: SimulatorConfig,
    x: Any,
    teacher: Callable[[Any], Any],
    ledger: CostLedger,
    tag: str = "simulator",
) -> tuple[Any, SimulatorState]:
    state.steps += 1
    pred = state.learner.predict(x)
    if state.mode == "active":
        if not pred.abstain and state.learner.confident(pred, cfg.gate):
            state.counters["student_calls"] += 1
            ledger.record_simulated(tag)
            return pred.value, state
        state.counters["fallbacks"] += 1
    y = teacher(x)
    state.counters["teacher_calls"] += 1
    _score(state, pred, y)
    state.learner.update(x, y)
    full = len(state.buffer) == cfg.window
    if state.mode == "shadow" and full and state.agreement() >= cfg.threshold:
        _transition(state, "active")
    elif state.mode == "active" and state.agreement() < cfg.threshold:
        _transition(state, "shadow")
    return y, state


def replay(
    inputs: Sequence[Any],
    teacher: Callable[[Any], Any],
    cfg: SimulatorConfig,
    ledger: CostLedger | None = None,
    state: SimulatorState | None = None,
) -> tuple[list, SimulatorState]:
    ledger = ledger or CostLedger()
    state = state or SimulatorState.fresh(cfg)
    outs = []
    for x in inputs:
        y, state = simulator_step(state, cfg, x, teacher, ledger)
        outs.append(y)
    return outs, state


def config_from_args(args: dict) -> SimulatorConfig:
    labels = args.get("labels")
    return SimulatorConfig(
        learner=args.get("learner", "memo"),
        window=int(args.get("window", 200)),
        threshold=float(args.get("threshold", 0.95)),
        gate=float(args.get("gate", 0.3)),
        labels=tuple(from_json(v) for v in labels) if labels else None,
    )
