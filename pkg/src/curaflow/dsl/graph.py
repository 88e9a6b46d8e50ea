"""Graph-level checks and the row-streaming analysis shared with the executor."""

from __future__ import annotations

from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter

from curaflow.dsl.spec import PipelineSpec
from curaflow.model import shapes_compatible


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # duplicate_node dangling_edge cycle unbound_input extra_input shape_mismatch unreachable
    nodes: tuple[str, ...]
    message: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def __str__(self):
        where = f"{self.line}:{self.col}: " if self.line else ""
        return f"{where}{self.kind}: {self.message}"


def topological_order(spec: PipelineSpec) -> list[str]:
    """Declaration-stable topological order; raises graphlib.CycleError."""
    ts: TopologicalSorter = TopologicalSorter()
    for n in spec.nodes:
        ts.add(n.id)
    for e in spec.edges:
        ts.add(e.dst, e.src)
    return list(ts.static_order())


def structural_diagnostics(spec: PipelineSpec) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    seen: dict[str, object] = {}
    for n in spec.nodes:
        if n.id in seen:
            out.append(Diagnostic("duplicate_node", (n.id,), f"duplicate node id {n.id!r}", n.line, n.col))
        seen[n.id] = n
    dangling = False
    for e in spec.edges:
        for end in (e.src, e.dst):
            if end not in seen:
                dangling = True
                out.append(
                    Diagnostic("dangling_edge", (e.src, e.dst), f"edge {e.src}->{e.dst} references unknown node {end!r}", e.line, e.col)
                )
    if out:
        return out

    try:
        topological_order(spec)
    except CycleError as exc:
        cycle = tuple(dict.fromkeys(exc.args[1]))
        first = next((e for e in spec.edges if e.src in cycle and e.dst in cycle), None)
        out.append(
            Diagnostic(
                "cycle",
                tuple(sorted(cycle)),
                "cycle through " + " -> ".join(exc.args[1]),
                first.line if first else 0,
                first.col if first else 0,
            )
        )

    for n in spec.nodes:
        incoming = spec.predecessors(n.id)
        ports = n.ports
        wired = [e.dst_port for e in incoming]
        if len(incoming) > len(ports):
            out.append(Diagnostic("extra_input", (n.id,), f"node {n.id!r} has {len(incoming)} inputs for {len(ports)} ports", n.line, n.col))
            continue
        for p in wired:
            if p not in ports:
                out.append(Diagnostic("extra_input", (n.id,), f"node {n.id!r} has no port {p!r}", n.line, n.col))
        # a node with no inbound edges is a source fed by the caller
        if incoming:
            missing = [p for p in ports if p not in wired]
            if missing:
                out.append(
                    Diagnostic("unbound_input", (n.id,), f"node {n.id!r} has unconnected input port(s) {', '.join(missing)}", n.line, n.col)
                )
    return out


def streamed_nodes(spec: PipelineSpec) -> set[str]:
    """Nodes that run once per row when a table source is streamed.

    A source declaring ``out="table"`` streams its rows; every downstream
    node whose input is not itself a table is streamed, and a table-typed
    node collects the streamed results back into a table.
    """
    streamed: set[str] = set()
    try:
        order = topological_order(spec)
    except CycleError:
        return streamed
    sources = set(spec.sources())
    for nid in order:
        if nid in sources:
            continue
        node = spec.node(nid)
        if node.input_shape == "table":
            continue
        for e in spec.predecessors(nid):
            up = spec.node(e.src)
            if (e.src in sources and up.output_shape == "table") or e.src in streamed:
                streamed.add(nid)
                break
    return streamed


def edge_shapes(spec: PipelineSpec, streamed: set[str] | None = None):
    """Yield (edge, produced shape, consumed shape) for every checkable edge."""
    if streamed is None:
        streamed = streamed_nodes(spec)
    sources = set(spec.sources())
    for e in spec.edges:
        up, down = spec.node(e.src), spec.node(e.dst)
        if len(down.ports) > 1:
            continue
        produced = up.output_shape
        if e.dst in streamed and e.src in sources and produced == "table":
            produced = "record"
        elif down.input_shape == "table" and e.src in streamed:
            produced = "table"
        yield e, produced, down.input_shape


def validate_graph(spec: PipelineSpec) -> list[Diagnostic]:
    """All diagnostics for ``spec``; an empty list means the graph is ok."""
    out = structural_diagnostics(spec)
    if any(d.kind in ("dangling_edge", "duplicate_node", "cycle") for d in out):
        return out
    for e, produced, consumed in edge_shapes(spec):
        if not shapes_compatible(produced, consumed):
            out.append(
                Diagnostic(
                    "shape_mismatch",
                    (e.src, e.dst),
                    f"{e.src} produces {produced} but {e.dst} consumes {consumed}",
                    e.line,
                    e.col,
                )
            )
    if len(spec.nodes) > 1:
        touched = {e.src for e in spec.edges} | {e.dst for e in spec.edges}
        for n in spec.nodes:
            if n.id not in touched:
                out.append(Diagnostic("unreachable", (n.id,), f"node {n.id!r} is not connected to the pipeline", n.line, n.col))
    return out
