"""Parsed pipeline structures."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Union

BINDING_KINDS = ("custom", "llm", "llmgc")
DECORATION_KINDS = ("validator", "simulator", "connector")

# operator args that describe the node's logical interface rather than configure it
SHAPE_ARGS = ("in", "out", "ports")


@dataclass(frozen=True)
class ParamRef:
    """``${name}`` placeholder, resolved at compile time."""

    name: str

    def __str__(self):
        return "${" + self.name + "}"


Literal = Union[str, int, float, bool, ParamRef, list]


@dataclass
class Binding:
    kind: str
    args: dict[str, Any] = field(default_factory=dict)


@dataclass
class Decoration:
    kind: str
    args: dict[str, Any] = field(default_factory=dict)


@dataclass
class NodeSpec:
    id: str
    operator: str
    args: dict[str, Any] = field(default_factory=dict)
    binding: Binding | None = None
    decorations: list[Decoration] = field(default_factory=list)
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def input_shape(self) -> str:
        return self.args.get("in", "any")

    @property
    def output_shape(self) -> str:
        return self.args.get("out", "any")

    @property
    def ports(self) -> list[str]:
        if "ports" in self.args:
            return list(self.args["ports"])
        return [] if self.input_shape == "none" else ["in"]

    @property
    def config_args(self) -> dict[str, Any]:
        return {k: v for k, v in self.args.items() if k not in SHAPE_ARGS}

    def decoration(self, kind: str) -> Decoration | None:
        for d in self.decorations:
            if d.kind == kind:
                return d
        return None


@dataclass
class Edge:
    src: str
    dst: str
    src_port: str = "out"
    dst_port: str = "in"
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass
class PipelineSpec:
    name: str
    params: dict[str, Any] = field(default_factory=dict)
    nodes: list[NodeSpec] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def predecessors(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.dst == node_id]

    def successors(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.src == node_id]

    def sources(self) -> list[str]:
        targets = {e.dst for e in self.edges}
        return [n.id for n in self.nodes if n.id not in targets]

    def sinks(self) -> list[str]:
        origins = {e.src for e in self.edges}
        return [n.id for n in self.nodes if n.id not in origins]
