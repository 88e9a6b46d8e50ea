"""Turning a parsed pipeline into executable modules."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from curaflow.bench.csvio import load_csv
from curaflow.compiler.customs import CustomRegistry
from curaflow.compiler.generate import GenerationFailed, GenerationSpec, generate_from
from curaflow.compiler.modules import (
    CustomImpl,
    DataExposureError,
    LlmImpl,
    OutputRule,
    PhysicalModule,
    ScriptImpl,
    contains_table,
    decorate,
    render_value,
)
from curaflow.dsl.graph import Diagnostic, streamed_nodes, topological_order, validate_graph
from curaflow.dsl.spec import Decoration, Edge, NodeSpec, ParamRef, PipelineSpec
from curaflow.llm.base import Backend, LlmRequest
from curaflow.model import CostLedger, ModuleDescriptor, TestCase
from curaflow.optimizer.connector import Connector, ConnectorPolicy, render_for_prompt
from curaflow.optimizer.simulator import SimulatorState, config_from_args, simulator_step
from curaflow.optimizer.validator import ValidationReport, ValidatorConfig, cases_from_pairs, load_cases, validate_and_repair
from curaflow.script import Limits, ScriptError, Tool, ToolRegistry


class CompileError(Exception):
    def __init__(self, message: str, node: str | None = None):
        super().__init__(f"node {node!r}: {message}" if node else message)
        self.node = node
        self.message = message


class UnknownCustomModule(CompileError):
    def __init__(self, name: str, node: str | None = None):
        super().__init__(f"unknown custom module {name!r}", node)
        self.name = name


class UnresolvedParam(CompileError):
    def __init__(self, name: str, node: str | None = None):
        super().__init__(f"parameter ${{{name}}} has no value", node)
        self.name = name


class InvalidPipeline(CompileError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


# --------------------------------------------------------------------------
# parameters


def _substitute(value: Any, params: dict, node: str | None) -> Any:
    if isinstance(value, ParamRef):
        if value.name not in params or params[value.name] is None:
            raise UnresolvedParam(value.name, node)
        return params[value.name]
    if isinstance(value, list):
        return [_substitute(v, params, node) for v in value]
    return value


def resolve_params(spec: PipelineSpec, overrides: dict | None = None) -> PipelineSpec:
    """A copy of ``spec`` with every ``${name}`` replaced by its value."""
    out = copy.deepcopy(spec)
    params = {**out.params, **(overrides or {})}
    out.params = params
    for n in out.nodes:
        n.args = {k: _substitute(v, params, n.id) for k, v in n.args.items()}
        if n.binding is not None:
            n.binding.args = {k: _substitute(v, params, n.id) for k, v in n.binding.args.items()}
        for d in n.decorations:
            d.args = {k: _substitute(v, params, n.id) for k, v in d.args.items()}
    return out


# --------------------------------------------------------------------------
# plan


@dataclass
class PhysicalPlan:
    spec: PipelineSpec
    order: list[str]
    modules: dict[str, PhysicalModule]
    edges: list[Edge]
    streamed: set[str] = field(default_factory=set)
    reports: dict[str, ValidationReport] = field(default_factory=dict)
    probes: dict[str, str] = field(default_factory=dict)
    ledger: CostLedger = field(default_factory=CostLedger)

    def __iter__(self):
        return ((nid, self.modules[nid]) for nid in self.order)

    def __len__(self):
        return len(self.order)

    def module(self, node_id: str) -> PhysicalModule:
        return self.modules[node_id]

    def default_mode(self) -> str:
        return "per_record" if self.streamed else "whole"

    def finalize(self) -> None:
        for _, m in self:
            m.finalize()

    def explain(self) -> str:
        lines = [f"pipeline {self.spec.name}: {len(self.order)} module(s), mode {self.default_mode()}"]
        for i, (nid, m) in enumerate(self, 1):
            node = self.spec.node(nid)
            where = " [per record]" if nid in self.streamed else ""
            lines.append(f"{i}. {nid} ({node.operator}) {node.input_shape} -> {node.output_shape}{where}")
            lines.append(f"   {describe_module(m)}")
            if nid in self.reports:
                lines.append(f"   validation {self.reports[nid].summary()}")
            if nid in self.probes:
                lines.append(f"   probe: {self.probes[nid]}")
        if self.edges:
            lines.append("edges: " + ", ".join(f"{e.src}->{e.dst}" + (f".{e.dst_port}" if e.dst_port != "in" else "") for e in self.edges))
        return "\n".join(lines)


def describe_module(m: PhysicalModule) -> str:
    wrappers = [f"{d}(" for d in reversed(m.decorations())]
    core = m.core().impl
    if isinstance(core, CustomImpl):
        inner = f"CustomImpl {core.name}"
    elif isinstance(core, LlmImpl):
        rule = f", validate={core.rule}" if core.rule else ""
        inner = f"LlmImpl parse={core.parse}{rule}"
    elif isinstance(core, ScriptImpl):
        tools = ", ".join(f"{n}={t.kind}" for n, t in core.registry.tools.items())
        inner = f"ScriptImpl ({len(core.script.source.splitlines())} lines" + (f"; tools: {tools})" if tools else ")")
    else:
        inner = type(core).__name__
    return "".join(wrappers) + inner + ")" * len(wrappers)


# --------------------------------------------------------------------------
# per-kind builders


def _str_list(v: Any) -> list[str]:
    if v is None:
        return []
    if isinstance(v, str):
        return [v]
    return [str(x) for x in v]


def llm_tool(node: str, name: str, instruction: str, backend: Backend) -> Tool:
    tag = f"{node}:tool:{name}"

    def fn(args: list, ledger: CostLedger) -> Any:
        x = args[0]
        if contains_table(x):
            raise DataExposureError(f"{tag}: tables cannot be sent to an LLM tool")
        prompt = f"{instruction}\n\nInput: {render_value(x)}"
        return backend.complete(LlmRequest.user(prompt, tag), ledger).text.strip()

    first = instruction.strip().splitlines()[0] if instruction.strip() else name
    return Tool(fn, input_shape="any", output_shape="text", arity=1, description=first, kind="llm")


def resolve_tools(
    node: NodeSpec,
    names: list[str],
    tool_prompts: list[str],
    default_instruction: str,
    customs: CustomRegistry,
    backend: Backend | None,
) -> ToolRegistry:
    reg = ToolRegistry()
    for i, name in enumerate(names):
        entry = customs.get(name)
        if entry is not None:
            try:
                fn = entry.factory()
            except TypeError as exc:
                raise CompileError(f"tool {name!r} cannot be built without arguments: {exc}", node.id) from None
            reg.register(name, Tool(lambda args, ledger, fn=fn: fn(args[0]), description=entry.description))
        elif name == "llm" or name.startswith("llm_"):
            if backend is None:
                raise CompileError(f"tool {name!r} needs an LLM backend", node.id)
            instruction = tool_prompts[i] if i < len(tool_prompts) else default_instruction
            reg.register(name, llm_tool(node.id, name, instruction, backend))
        else:
            raise UnknownCustomModule(name, node.id)
    return reg


def _descriptor(node: NodeSpec, kind: str, config: dict) -> ModuleDescriptor:
    return ModuleDescriptor(node.id, kind, node.input_shape, node.output_shape, config)


def _build_custom(node: NodeSpec, customs: CustomRegistry) -> PhysicalModule:
    bargs = dict(node.binding.args) if node.binding else {}
    name = str(bargs.pop("name", node.operator))
    args = {**node.config_args, **bargs}
    entry = customs.get(name)
    if entry is None:
        raise UnknownCustomModule(name, node.id)
    try:
        fn = entry.factory(**args)
    except TypeError as exc:
        raise CompileError(f"bad arguments for custom module {name!r}: {exc}", node.id) from None
    impl = CustomImpl(name, fn, args)
    return PhysicalModule(_descriptor(node, "custom", {"name": name, "args": args}), impl, pure=entry.pure)


def _pick(node: NodeSpec, *keys: str, default: Any = None) -> Any:
    bargs = node.binding.args if node.binding else {}
    for k in keys:
        if k in bargs:
            return bargs[k]
    for k in keys:
        if k in node.config_args:
            return node.config_args[k]
    return default


def _build_llm(node: NodeSpec, backend: Backend | None, ledger: CostLedger) -> PhysicalModule:
    if backend is None:
        raise CompileError("llm modules need a backend", node.id)
    prompt = _pick(node, "prompt", "task")
    if not prompt:
        raise CompileError("llm binding needs prompt=", node.id)
    rule_text = _pick(node, "validate")
    try:
        rule = OutputRule.parse(rule_text) if rule_text else None
        impl = LlmImpl(
            tag=node.id,
            prompt=str(prompt),
            backend=backend,
            ledger=ledger,
            parse=str(_pick(node, "parse", default="text")),
            rule=rule,
            system=str(_pick(node, "system", default="")),
            temperature=float(_pick(node, "temperature", default=0.0)),
            max_tokens=int(_pick(node, "max_tokens", default=1024)),
        )
    except ValueError as exc:
        raise CompileError(str(exc), node.id) from None
    config = {"prompt": impl.prompt, "parse": impl.parse, "validate": str(rule) if rule else None}
    return PhysicalModule(_descriptor(node, "llm", config), impl, pure=False)


def _validator_cases(args: dict, node: str) -> list[TestCase]:
    try:
        if "cases" in args:
            return load_cases(args["cases"], args.get("comparator"))
        if "inputs" in args and "expected" in args:
            return cases_from_pairs(
                [_json_literal(x) for x in args["inputs"]], [_json_literal(x) for x in args["expected"]], args.get("comparator")
            )
    except (OSError, ValueError, KeyError) as exc:
        raise CompileError(f"cannot load validator cases: {exc}", node) from None
    raise CompileError("validator needs cases= or inputs=/expected=", node)


def _json_literal(x: Any) -> Any:
    """Inline case values may be JSON text (``"{\\"a\\": 1}"``) or plain literals."""
    if isinstance(x, str) and x[:1] in "[{":
        try:
            return json.loads(x)
        except ValueError:
            return x
    return x


def _build_llmgc(
    node: NodeSpec, customs: CustomRegistry, backend: Backend | None, ledger: CostLedger, limits: Limits
) -> PhysicalModule:
    if backend is None:
        raise CompileError("llmgc modules need a backend to generate code", node.id)
    task = _pick(node, "task", "prompt")
    if not task:
        raise CompileError("llmgc binding needs task=", node.id)
    tools = _str_list(_pick(node, "tools"))
    tool_prompts = _str_list(_pick(node, "tool_prompts"))
    registry = resolve_tools(node, tools, tool_prompts, str(task), customs, backend)
    examples_arg = _pick(node, "examples")
    if examples_arg is not None:
        try:
            examples = load_cases(examples_arg)
        except (OSError, ValueError, KeyError) as exc:
            raise CompileError(f"cannot load examples: {exc}", node.id) from None
    elif node.decoration("validator") is not None:
        examples = _validator_cases(node.decoration("validator").args, node.id)
    else:
        examples = []
    timeout = _pick(node, "timeout")
    gspec = GenerationSpec(
        task=str(task),
        tag=f"{node.id}:generate",
        examples=examples,
        tools=registry.signatures(),
        guidance=str(_pick(node, "guidance", default="")),
        max_attempts=int(_pick(node, "max_attempts", default=3)),
        deadline=float(timeout) if timeout is not None else None,
    )
    steps = _pick(node, "max_steps")
    if steps is not None:
        limits = Limits(int(steps), limits.max_string_len, limits.max_collection_size)
    try:
        script = generate_from(gspec, backend, ledger)
    except GenerationFailed as exc:
        exc.node = node.id
        raise
    impl = ScriptImpl(script, registry, limits, ledger, gspec)
    config = {"task": gspec.task, "tools": tools}
    return PhysicalModule(_descriptor(node, "llmgc", config), impl, pure=not registry.tools)


# --------------------------------------------------------------------------
# decorations


def _passthrough(inner: PhysicalModule, value: Any, context: Any) -> Any:
    return inner(value, context)


def _apply_validator(
    node: NodeSpec, d: Decoration, module: PhysicalModule, backend, ledger, run: bool, reports: dict
) -> PhysicalModule:
    cases = _validator_cases(d.args, node.id)
    try:
        cfg = ValidatorConfig(
            tuple(cases), int(d.args.get("rounds", 3)), int(d.args.get("regenerations", 2))
        )
    except ValueError as exc:
        raise CompileError(str(exc), node.id) from None
    report = None
    if run:
        if backend is None:
            raise CompileError("validator needs a backend to run", node.id)
        module, report = validate_and_repair(module, cfg, backend, ledger)
        reports[node.id] = report
    out = decorate(module, "validator", _passthrough, state={"config": cfg, "report": report})
    return out


def _apply_simulator(node: NodeSpec, d: Decoration, module: PhysicalModule, ledger: CostLedger) -> PhysicalModule:
    try:
        cfg = config_from_args(d.args)
    except ValueError as exc:
        raise CompileError(str(exc), node.id) from None
    checkpoint = d.args.get("checkpoint")
    if checkpoint and Path(checkpoint).exists():
        state = SimulatorState.load(checkpoint, cfg)
    else:
        state = SimulatorState.fresh(cfg)
    tag = f"{node.id}:simulator"

    def hook(inner: PhysicalModule, value: Any, context: Any) -> Any:
        out, _ = simulator_step(state, cfg, value, lambda v: inner(v, context), ledger, tag)
        return out

    finalizer = (lambda: state.save(checkpoint)) if checkpoint else None
    return decorate(module, "simulator", hook, state={"config": cfg, "state": state}, finalizer=finalizer)


def _apply_connector(node: NodeSpec, d: Decoration, module: PhysicalModule) -> PhysicalModule:
    args = d.args
    for key in ("policy", "table", "query"):
        if key not in args:
            raise CompileError(f"connector needs {key}=", node.id)
    try:
        policy = ConnectorPolicy.from_file(args["policy"])
        table = load_csv(args["table"], args.get("schema"))
    except (OSError, ValueError, KeyError) as exc:
        raise CompileError(f"connector setup failed: {exc}", node.id) from None
    query = str(args["query"])
    if query not in policy.queries:
        raise CompileError(f"connector query {query!r} is not in the policy", node.id)
    declared = policy.queries[query].params
    connector = Connector(policy, audit_path=args.get("audit"))
    max_cells = int(args.get("max_cells", 200))

    def hook(inner: PhysicalModule, value: Any, context: Any) -> Any:
        params = {p: value[p] for p in declared if isinstance(value, dict) and p in value}
        rows = connector.execute(query, params, table)
        return inner(value, render_for_prompt(rows, max_cells))

    return decorate(module, "connector", hook, state={"connector": connector, "query": query})


# --------------------------------------------------------------------------

PROBES = {"text": "", "int": 0, "float": 0.0, "bool": False, "record": {}, "list": [], "null": None, "none": None, "any": None}


def _probe(module: PhysicalModule, shape: str) -> str:
    if shape.startswith("list<"):
        shape = "list"
    if shape not in PROBES:
        return "skipped"
    try:
        module(PROBES[shape])
    except ScriptError as exc:
        return f"raised {type(exc).__name__}"
    return "ok"


def compile_pipeline(
    spec: PipelineSpec,
    custom_registry: CustomRegistry | None = None,
    backend: Backend | None = None,
    ledger: CostLedger | None = None,
    *,
    params: dict | None = None,
    limits: Limits | None = None,
    run_validators: bool = True,
) -> PhysicalPlan:
    customs = custom_registry or CustomRegistry()
    ledger = ledger if ledger is not None else CostLedger()
    limits = limits or Limits()
    diags = validate_graph(spec)
    if diags:
        raise InvalidPipeline(diags)
    spec = resolve_params(spec, params)
    order = topological_order(spec)
    modules: dict[str, PhysicalModule] = {}
    reports: dict[str, ValidationReport] = {}
    probes: dict[str, str] = {}
    for nid in order:
        node = spec.node(nid)
        kind = node.binding.kind if node.binding else "custom"
        if kind == "custom":
            module = _build_custom(node, customs)
        elif kind == "llm":
            module = _build_llm(node, backend, ledger)
        elif kind == "llmgc":
            module = _build_llmgc(node, customs, backend, ledger, limits)
        else:  # pragma: no cover - the parser rejects other kinds
            raise CompileError(f"unknown binding kind {kind!r}", nid)
        if module.pure:
            probes[nid] = _probe(module, node.input_shape)
        for d in node.decorations:
            if d.kind == "validator":
                module = _apply_validator(node, d, module, backend, ledger, run_validators, reports)
            elif d.kind == "simulator":
                module = _apply_simulator(node, d, module, ledger)
            elif d.kind == "connector":
                module = _apply_connector(node, d, module)
        modules[nid] = module
    return PhysicalPlan(spec, order, modules, list(spec.edges), streamed_nodes(spec), reports, probes, ledger)
