from __future__ import annotations

from typing import Any

from curaflow.dsl.lexer import quote
from curaflow.dsl.spec import Edge, ParamRef, PipelineSpec


def format_literal(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, ParamRef):
        return str(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        if text in ("inf", "-inf", "nan"):
            raise ValueError(f"non-finite number {text} has no literal form")
        return text
    if isinstance(value, str):
        return quote(value)
    if isinstance(value, list):
        return "[" + ", ".join(format_literal(v) for v in value) + "]"
    raise TypeError(f"not a pipeline literal: {value!r}")


def format_args(args: dict[str, Any]) -> str:
    return "(" + ", ".join(f"{k}={format_literal(v)}" for k, v in args.items()) + ")"


def _chains(edges: list[Edge]) -> list[list[str]]:
    # consecutive edges a->b, b->c fold into one chain; edge order is preserved
    chains: list[list[str]] = []
    for e in edges:
        if chains and chains[-1][-1] == e.src:
            chains[-1].append(e.dst)
        else:
            chains.append([e.src, e.dst])
    return chains


def pretty_print(spec: PipelineSpec) -> str:
    lines = [f"pipeline {spec.name} {{"]
    for name, value in spec.params.items():
        lines.append(f"  param {name} = {format_literal(value)};")
    if spec.params and spec.nodes:
        lines.append("")
    for node in spec.nodes:
        head = f"  node {node.id}: {node.operator}{format_args(node.args)}"
        if node.binding is not None:
            head += f" {node.binding.kind}{format_args(node.binding.args)}"
        parts = [head]
        for d in node.decorations:
            parts.append(f"    with {d.kind}{format_args(d.args)}")
        lines.append("\n".join(parts) + ";")
    if spec.edges:
        lines.append("")
    for chain in _chains(spec.edges):
        lines.append("  " + " -> ".join(chain) + ";")
    lines.append("}")
    return "\n".join(lines) + "\n"
