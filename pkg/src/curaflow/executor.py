"""Running a compiled plan over data.

``whole`` mode calls every module once on its (joined) inputs. ``per_record``
mode streams each table produced by a source row by row through the nodes
downstream of it; a node declaring ``in="table"`` collects the streamed
results back into a table, in input order. Nodes run one after another in
topological order, so simulator state evolves in a reproducible order.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Any, Mapping

from curaflow.bench.csvio import as_table
from curaflow.compiler.compile import PhysicalPlan
from curaflow.dsl.printer import pretty_print
from curaflow.model import COUNTERS, Table, dumps, ledger_delta, ledger_sum, shape_accepts, to_json, type_tag

MODES = ("auto", "whole", "per_record")
COMPILE_ENTRY = "_compile"


class ExecutionError(RuntimeError):
    pass


class ModuleError(ExecutionError):
    def __init__(self, node: str, index: int | None, wrapped: BaseException):
        where = f" on record {index}" if index is not None else ""
        super().__init__(f"node {node!r} failed{where}: {type(wrapped).__name__}: {wrapped}")
        self.node = node
        self.index = index
        self.wrapped = wrapped


class ShapeMismatch(ExecutionError):
    def __init__(self, edge: tuple[str, str], expected: str, got: str, index: int | None = None):
        where = f" (record {index})" if index is not None else ""
        super().__init__(f"edge {edge[0]} -> {edge[1]}: expected {expected}, got {got}{where}")
        self.edge = edge
        self.expected = expected
        self.got = got
        self.index = index

    @property
    def node(self) -> str:
        return self.edge[1]


class _Failed:
    """Marker for a record whose processing failed under skip_errors."""

    __slots__ = ("node", "message")

    def __init__(self, node: str, message: str):
        self.node = node
        self.message = message


@dataclass
class NodeStats:
    records_in: int = 0
    records_out: int = 0
    errors: int = 0
    wall_time: float = 0.0
    error_samples: list[str] = field(default_factory=list)

    def to_json(self, timings: bool) -> dict:
        out = {
            "records_in": self.records_in,
            "records_out": self.records_out,
            "errors": self.errors,
            "error_samples": list(self.error_samples),
        }
        if timings:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class RunReport:
    run_id: str
    pipeline: str
    mode: str
    backend: str
    seed: int | None
    nodes: dict[str, NodeStats]
    ledger: dict
    node_ledger: dict[str, dict]

    def conserved(self) -> bool:
        total = ledger_sum(list(self.node_ledger.values()))
        return all(total[c] == self.ledger[c] for c in COUNTERS) and total["per_tag"] == {
            t: v for t, v in self.ledger["per_tag"].items() if any(v.values())
        }

    def to_json(self, timings: bool = False) -> dict:
        return {
            "run_id": self.run_id,
            "pipeline": self.pipeline,
            "mode": self.mode,
            "backend": self.backend,
            "seed": self.seed,
            "nodes": {k: v.to_json(timings) for k, v in self.nodes.items()},
            "ledger": self.ledger,
            "node_ledger": self.node_ledger,
        }

    def dumps(self, timings: bool = False) -> str:
        return json.dumps(self.to_json(timings), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _run_id(plan: PhysicalPlan, inputs: Mapping[str, Any], mode: str, backend: str, seed: int | None) -> str:
    h = hashlib.sha256()
    h.update(pretty_print(plan.spec).encode("utf-8"))
    h.update(dumps({k: inputs[k] for k in sorted(inputs)}).encode("utf-8"))
    h.update(json.dumps([mode, backend, seed]).encode("utf-8"))
    return h.hexdigest()[:16]


def _assemble(outputs: list, column: str) -> Table:
    present = [o for o in outputs if o is not None]
    if present and all(isinstance(o, dict) for o in present):
        rows = [o if o is not None else {} for o in outputs]
    else:
        rows = [{column: o} for o in outputs]
    return as_table(rows, column)


class _Run:
    def __init__(self, plan: PhysicalPlan, skip_errors: bool):
        self.plan = plan
        self.spec = plan.spec
        self.skip_errors = skip_errors
        self.stats = {nid: NodeStats() for nid in plan.order}
        self.node_ledger: dict[str, dict] = {}
        self.values: dict[str, Any] = {}  # whole-mode outputs
        self.rows: dict[str, list] = {}  # per-record outputs of streamed nodes
        self.streamed: set[str] = set()
        self.n_rows: int | None = None

    # -- helpers ---------------------------------------------------------

    def _fail(self, nid: str, index: int | None, exc: BaseException) -> _Failed:
        if not self.skip_errors:
            raise ModuleError(nid, index, exc) from exc
        st = self.stats[nid]
        st.errors += 1
        if len(st.error_samples) < 5:
            where = f"record {index}: " if index is not None else ""
            st.error_samples.append(f"{where}{type(exc).__name__}: {exc}")
        return _Failed(nid, str(exc))

    def _call(self, nid: str, value: Any, index: int | None) -> Any:
        node = self.spec.node(nid)
        st = self.stats[nid]
        st.records_in += 1
        if isinstance(value, _Failed):
            st.errors += 1
            return value
        try:
            out = self.plan.modules[nid](value)
        except Exception as exc:  # noqa: BLE001 - any module failure is reported with its node
            return self._fail(nid, index, exc)
        if not shape_accepts(node.output_shape, out):
            raise ShapeMismatch((nid, "output"), node.output_shape, type_tag(out), index)
        st.records_out += 1
        return out

    def _check_in(self, nid: str, src: str, value: Any, index: int | None) -> None:
        if isinstance(value, _Failed):
            return
        shape = self.spec.node(nid).input_shape
        if not shape_accepts(shape, value):
            raise ShapeMismatch((src, nid), shape, type_tag(value), index)

    # -- modes -----------------------------------------------------------

    def run_sources(self, inputs: Mapping[str, Any]) -> None:
        for nid in self.spec.sources():
            node = self.spec.node(nid)
            if node.input_shape == "none" and nid not in inputs:
                value = None
            elif nid in inputs:
                value = inputs[nid]
                if not shape_accepts(node.input_shape, value):
                    raise ShapeMismatch(("input", nid), node.input_shape, type_tag(value))
            else:
                raise ExecutionError(f"no input supplied for source node {nid!r}")
            self._timed(nid, lambda: self.values.__setitem__(nid, self._call(nid, value, None)))

    def _timed(self, nid: str, fn) -> None:
        before = self.plan.ledger.snapshot()
        t0 = time.perf_counter()
        try:
            fn()
        finally:
            self.stats[nid].wall_time += time.perf_counter() - t0
            self.node_ledger[nid] = ledger_delta(before, self.plan.ledger.snapshot())

    def plan_streaming(self) -> None:
        sources = set(self.spec.sources())
        lengths = set()
        for nid in self.plan.order:
            if nid in sources:
                continue
            if self.spec.node(nid).input_shape == "table":
                continue
            for e in self.spec.predecessors(nid):
                src_val = self.values.get(e.src)
                if (e.src in sources and isinstance(src_val, Table)) or e.src in self.streamed:
                    self.streamed.add(nid)
                    if e.src in sources:
                        lengths.add(len(src_val))
                    break
        if len(lengths) > 1:
            raise ExecutionError(f"streamed tables differ in length: {sorted(lengths)}")
        self.n_rows = lengths.pop() if lengths else None

    def run_rest(self) -> None:
        sources = set(self.spec.sources())
        for nid in self.plan.order:
            if nid in sources:
                continue
            if nid in self.streamed:
                self._timed(nid, lambda nid=nid: self._stream_node(nid))
            else:
                value = self._join(nid, self._whole_input, None)
                self._timed(nid, lambda nid=nid, value=value: self.values.__setitem__(nid, self._call(nid, value, None)))

    def _whole_input(self, src: str) -> Any:
        if src in self.streamed:
            return _assemble([None if isinstance(o, _Failed) else o for o in self.rows[src]], src)
        return self.values[src]

    def _stream_node(self, nid: str) -> None:
        sources = set(self.spec.sources())
        out = []
        for k in range(self.n_rows or 0):

            def get(src: str, k=k) -> Any:
                if src in self.streamed:
                    return self.rows[src][k]
                v = self.values[src]
                if src in sources and isinstance(v, Table):
                    return dict(v.rows[k])
                return v

            value = self._join(nid, get, k)
            out.append(self._call(nid, value, k))
        self.rows[nid] = out

    def _join(self, nid: str, get, k: int | None) -> Any:
        node = self.spec.node(nid)
        preds = self.spec.predecessors(nid)
        if len(node.ports) <= 1:
            value = get(preds[0].src)
            self._check_in(nid, preds[0].src, value, k)
            return value
        joined = {}
        for e in preds:
            v = get(e.src)
            if isinstance(v, _Failed):
                return v
            joined[e.dst_port] = v
        return {p: joined.get(p) for p in node.ports}

    def outputs(self) -> dict[str, Any]:
        out = {}
        for nid in self.spec.sinks():
            if nid in self.streamed:
                out[nid] = self._whole_input(nid)
            else:
                v = self.values.get(nid)
                out[nid] = None if isinstance(v, _Failed) else v
        return out


def run(
    plan: PhysicalPlan,
    inputs: Mapping[str, Any] | None = None,
    mode: str = "auto",
    *,
    skip_errors: bool = False,
    backend_kind: str = "",
    seed: int | None = None,
) -> tuple[dict[str, Any], RunReport]:
    """Execute ``plan``; returns sink outputs and the run report."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    inputs = dict(inputs or {})
    unknown = sorted(set(inputs) - set(plan.spec.sources()))
    if unknown:
        raise ExecutionError(f"inputs given for non-source node(s) {unknown}")
    if mode == "auto":
        mode = plan.default_mode()
    start = plan.ledger.snapshot()
    r = _Run(plan, skip_errors)
    r.node_ledger[COMPILE_ENTRY] = ledger_delta({**dict.fromkeys(COUNTERS, 0), "per_tag": {}}, start)
    r.run_sources(inputs)
    if mode == "per_record":
        r.plan_streaming()
        if r.n_rows is None:
            raise ExecutionError("per_record mode needs a source that produces a table")
    r.run_rest()
    outputs = r.outputs()
    plan.finalize()
    report = RunReport(
        run_id=_run_id(plan, inputs, mode, backend_kind, seed),
        pipeline=plan.spec.name,
        mode=mode,
        backend=backend_kind,
        seed=seed,
        nodes=r.stats,
        ledger=plan.ledger.snapshot(),
        node_ledger=r.node_ledger,
    )
    return outputs, report


def outputs_json(outputs: Mapping[str, Any]) -> str:
    """Canonical text of run outputs, for files and byte-level comparison."""
    return json.dumps({k: to_json(v) for k, v in sorted(outputs.items())}, sort_keys=True, ensure_ascii=False, indent=2) + "\n"
