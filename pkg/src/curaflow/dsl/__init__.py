from curaflow.dsl.graph import Diagnostic, streamed_nodes, topological_order, validate_graph
from curaflow.dsl.lexer import ParseError
from curaflow.dsl.parser import parse_pipeline
from curaflow.dsl.printer import pretty_print
from curaflow.dsl.spec import Binding, Decoration, Edge, NodeSpec, ParamRef, PipelineSpec

__all__ = [
    "Binding",
    "Decoration",
    "Diagnostic",
    "Edge",
    "NodeSpec",
    "ParamRef",
    "ParseError",
    "PipelineSpec",
    "parse_pipeline",
    "pretty_print",
    "streamed_nodes",
    "topological_order",
    "validate_graph",
]
