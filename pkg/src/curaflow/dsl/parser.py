"""Recursive-descent parser for ``.lm`` pipeline files.

Grammar::

    pipeline   := "pipeline" IDENT "{" item* "}"
    item       := param | node | chain
    param      := "param" IDENT "=" literal ";"
    node       := "node" IDENT ":" IDENT "(" args? ")" binding? deco* ";"
    binding    := KIND "(" args? ")"            KIND in custom|llm|llmgc
    deco       := "with" DKIND "(" args? ")"    DKIND in validator|simulator|connector
    chain      := IDENT ("->" IDENT)+ ";"
    args       := arg ("," arg)*
    arg        := IDENT "=" (literal | "[" literal* "]")
    literal    := STRING | NUMBER | "true" | "false" | "${" IDENT "}"

List elements may optionally be separated by commas.
"""

from __future__ import annotations

from typing import Any

from curaflow.dsl.graph import structural_diagnostics
from curaflow.dsl.lexer import ParseError, Token, tokenize
from curaflow.dsl.spec import (
    BINDING_KINDS,
    DECORATION_KINDS,
    Binding,
    Decoration,
    Edge,
    NodeSpec,
    ParamRef,
    PipelineSpec,
)
from curaflow.model import check_shape


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def error(self, expected: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(tok.line, tok.col, f"expected {expected}, found {tok.describe()}")

    def at(self, kind: str, value: object = None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def expect(self, kind: str, value: object = None, what: str | None = None) -> Token:
        if not self.at(kind, value):
            raise self.error(what or (repr(value) if value is not None else kind.lower()))
        t = self.tok
        self.pos += 1
        return t

    def ident(self, what: str = "identifier") -> Token:
        return self.expect("IDENT", what=what)

    # ------------------------------------------------------------------

    def pipeline(self) -> tuple[PipelineSpec, list]:
        self.expect("KEYWORD", "pipeline", '"pipeline"')
        name = self.ident("pipeline name").value
        self.expect("PUNCT", "{", '"{"')
        spec = PipelineSpec(name=name)
        chains: list[tuple[Token, list[Token]]] = []
        while not self.at("PUNCT", "}"):
            if self.at("KEYWORD", "param"):
                self.param(spec)
            elif self.at("KEYWORD", "node"):
                self.node(spec)
            elif self.at("IDENT"):
                chains.append(self.chain())
            else:
                raise self.error('"param", "node", a chain, or "}"')
        self.pos += 1
        if not self.at("EOF"):
            raise self.error("end of input")
        return spec, chains

    def param(self, spec: PipelineSpec) -> None:
        self.pos += 1
        name_tok = self.ident("parameter name")
        if name_tok.value in spec.params:
            raise ParseError(name_tok.line, name_tok.col, f"duplicate parameter {name_tok.value!r}")
        self.expect("PUNCT", "=", '"="')
        if self.at("PUNCT", "${"):
            raise self.error("a constant literal (parameter defaults cannot reference parameters)")
        spec.params[name_tok.value] = self.literal()
        self.expect("PUNCT", ";", '";"')

    def node(self, spec: PipelineSpec) -> None:
        self.pos += 1
        id_tok = self.ident("node id")
        if any(n.id == id_tok.value for n in spec.nodes):
            raise ParseError(id_tok.line, id_tok.col, f"duplicate node id {id_tok.value!r}")
        self.expect("PUNCT", ":", '":"')
        op = self.ident("operator name").value
        args = self.arglist()
        _check_shape_args(args, id_tok)
        node = NodeSpec(id=id_tok.value, operator=op, args=args, line=id_tok.line, col=id_tok.col)
        if self.at("IDENT"):
            kind_tok = self.tok
            if kind_tok.value not in BINDING_KINDS:
                raise self.error("binding kind (custom, llm, llmgc), \"with\", or \";\"")
            self.pos += 1
            node.binding = Binding(kind_tok.value, self.arglist())
        while self.at("KEYWORD", "with"):
            self.pos += 1
            kind_tok = self.ident("decoration kind (validator, simulator, connector)")
            if kind_tok.value not in DECORATION_KINDS:
                raise self.error("decoration kind (validator, simulator, connector)", kind_tok)
            if node.decoration(kind_tok.value) is not None:
                raise ParseError(kind_tok.line, kind_tok.col, f"duplicate {kind_tok.value} decoration")
            node.decorations.append(Decoration(kind_tok.value, self.arglist()))
        self.expect("PUNCT", ";", '";"')
        spec.nodes.append(node)

    def chain(self) -> tuple[Token, list[Token]]:
        first = self.ident()
        ids = [first]
        self.expect("PUNCT", "->", '"->"')
        ids.append(self.ident("node id"))
        while self.at("PUNCT", "->"):
            self.pos += 1
            ids.append(self.ident("node id"))
        self.expect("PUNCT", ";", '"->" or ";"')
        return first, ids

    def arglist(self) -> dict[str, Any]:
        self.expect("PUNCT", "(", '"("')
        args: dict[str, Any] = {}
        if self.at("PUNCT", ")"):
            self.pos += 1
            return args
        while True:
            name = self.ident("argument name")
            if name.value in args:
                raise ParseError(name.line, name.col, f"duplicate argument {name.value!r}")
            self.expect("PUNCT", "=", '"="')
            if self.at("PUNCT", "["):
                self.pos += 1
                items = []
                while not self.at("PUNCT", "]"):
                    items.append(self.literal())
                    if self.at("PUNCT", ","):
                        self.pos += 1
                self.pos += 1
                args[name.value] = items
            else:
                args[name.value] = self.literal()
            if self.at("PUNCT", ","):
                self.pos += 1
                continue
            self.expect("PUNCT", ")", '"," or ")"')
            return args

    def literal(self) -> Any:
        t = self.tok
        if t.kind in ("STRING", "NUMBER"):
            self.pos += 1
            return t.value
        if t.kind == "KEYWORD" and t.value in ("true", "false"):
            self.pos += 1
            return t.value == "true"
        if self.at("PUNCT", "${"):
            self.pos += 1
            name = self.ident("parameter name").value
            self.expect("PUNCT", "}", '"}"')
            return ParamRef(name)
        raise self.error("literal")


def _check_shape_args(args: dict, tok: Token) -> None:
    for key in ("in", "out"):
        if key in args:
            value = args[key]
            if not isinstance(value, str):
                raise ParseError(tok.line, tok.col, f"{key}= must be a string shape")
            try:
                check_shape(value)
            except ValueError as exc:
                raise ParseError(tok.line, tok.col, str(exc)) from None
    if "ports" in args:
        ports = args["ports"]
        if not isinstance(ports, list) or not all(isinstance(p, str) and p for p in ports):
            raise ParseError(tok.line, tok.col, "ports= must be a list of names")
        if len(set(ports)) != len(ports):
            raise ParseError(tok.line, tok.col, "duplicate port name")


def _wire(spec: PipelineSpec, chains: list[tuple[Token, list[Token]]]) -> None:
    """Turn chains into edges, assigning target ports in declaration order."""
    known = {n.id: n for n in spec.nodes}
    used: dict[str, int] = {}
    for _, ids in chains:
        for a, b in zip(ids, ids[1:]):
            for t in (a, b):
                if t.value not in known:
                    raise ParseError(t.line, t.col, f"unknown node {t.value!r} in chain")
            target = known[b.value]
            ports = target.ports
            k = used.get(b.value, 0)
            if k >= len(ports):
                raise ParseError(
                    b.line, b.col, f"node {b.value!r} has no free input port ({len(ports)} declared)"
                )
            used[b.value] = k + 1
            spec.edges.append(Edge(a.value, b.value, "out", ports[k], line=b.line, col=b.col))


def parse_pipeline(source: str) -> PipelineSpec:
    """Parse ``.lm`` source into a structurally valid PipelineSpec.

    Raises ParseError on the first syntax error or graph-invariant breach
    (duplicate ids, unknown chain endpoints, cycles, partially wired nodes).
    """
    p = _Parser(source)
    spec, chains = p.pipeline()
    _wire(spec, chains)
    for diag in structural_diagnostics(spec):
        raise ParseError(diag.line, diag.col, diag.message)
    return spec
