from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from curaflow.model import INT_MAX, INT_MIN, MAX_DEPTH, CostLedger, Table, type_tag
from curaflow.script import ast
from curaflow.script.builtins import BUILTINS, BuiltinTypeError
from curaflow.script.parser import Script, ScriptError
from curaflow.script.regex import RegexError


class StepLimitExceeded(ScriptError):
    pass


class ScriptTypeError(ScriptError):
    def __init__(self, op: str, got: str, line: int = 0, col: int = 0):
        super().__init__(f"type error in {op}: got {got}", line, col)
        self.op = op
        self.got = got


class ScriptRuntimeError(ScriptError):
    pass


class ResourceLimitExceeded(ScriptError):
    pass


class UnknownTool(ScriptError):
    def __init__(self, name: str, line: int = 0, col: int = 0):
        super().__init__(f"unknown tool {name!r}", line, col)
        self.name = name


class ToolError(ScriptError):
    def __init__(self, name: str, wrapped: BaseException, line: int = 0, col: int = 0):
        super().__init__(f"tool {name!r} failed: {wrapped}", line, col)
        self.name = name
        self.wrapped = wrapped


@dataclass(frozen=True)
class Limits:
    max_steps: int = 1_000_000
    max_string_len: int = 1_000_000
    max_collection_size: int = 100_000

    def __post_init__(self):
        if min(self.max_steps, self.max_string_len, self.max_collection_size) <= 0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class Tool:
    """A capability handed to scripts. ``fn(args, ledger)`` returns a Value."""

    fn: Callable[[list, CostLedger], Any]
    input_shape: str = "any"
    output_shape: str = "any"
    arity: int | None = 1
    description: str = ""
    kind: str = "custom"  # "llm" when the tool calls a model

    def signature(self, name: str) -> str:
        if self.arity == 1:
            params = f"x: {self.input_shape}"
        elif self.arity is None:
            params = "args..."
        else:
            params = ", ".join(f"a{i}" for i in range(self.arity))
        text = f'call("{name}", {params}) -> {self.output_shape}'
        return f"{text}  # {self.description}" if self.description else text


@dataclass
class ToolRegistry:
    tools: dict[str, Tool] = field(default_factory=dict)

    def register(self, name: str, tool: Tool) -> None:
        if name in self.tools:
            raise ValueError(f"tool {name!r} already registered")
        self.tools[name] = tool

    def get(self, name: str) -> Tool | None:
        return self.tools.get(name)

    def names(self) -> list[str]:
        return list(self.tools)

    def signatures(self) -> list[str]:
        return [t.signature(n) for n, t in self.tools.items()]


class _Return(Exception):
    def __init__(self, value):
        self.value = value


def _num(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class _Context:
    """Evaluation state: step budget, limits and tool access."""

    def __init__(self, limits: Limits, registry: ToolRegistry, ledger: CostLedger):
        self.limits = limits
        self.registry = registry
        self.ledger = ledger
        self.steps = 0
        self.where = (0, 0)
        self._depths: dict[int, tuple[Any, int]] = {}

    def tick(self) -> None:
        self.steps += 1
        if self.steps > self.limits.max_steps:
            raise StepLimitExceeded(f"exceeded {self.limits.max_steps} steps", *self.where)

    def text(self, s: str) -> str:
        if len(s) > self.limits.max_string_len:
            raise ResourceLimitExceeded(f"string longer than {self.limits.max_string_len}", *self.where)
        return s

    def collection(self, items):
        if len(items) > self.limits.max_collection_size:
            raise ResourceLimitExceeded(f"collection larger than {self.limits.max_collection_size}", *self.where)
        return items

    def depth(self, v: Any) -> int:
        if not isinstance(v, (list, tuple, dict)):
            return 0
        hit = self._depths.get(id(v))
        if hit is not None and hit[0] is v:
            return hit[1]
        children = v.values() if isinstance(v, dict) else v
        d = 1 + max((self.depth(c) for c in children), default=0)
        self._depths[id(v)] = (v, d)
        return d

    def container(self, v, items) -> Any:
        d = 1 + max((self.depth(x) for x in items), default=0)
        if d > MAX_DEPTH:
            raise ResourceLimitExceeded(f"value nested deeper than {MAX_DEPTH}", *self.where)
        self._depths[id(v)] = (v, d)
        return v

    def equal(self, a: Any, b: Any) -> bool:
        if _num(a) and _num(b):
            return a == b
        ta, tb = type_tag(a), type_tag(b)
        if ta != tb:
            return False
        if ta == "list":
            return len(a) == len(b) and all(self.equal(x, y) for x, y in zip(a, b))
        if ta == "record":
            return list(a) == list(b) and all(self.equal(a[k], b[k]) for k in a)
        return a == b

    def apply(self, name: str, args: tuple) -> Any:
        self.tick()
        try:
            out = BUILTINS[name].fn(self, *args)
        except BuiltinTypeError as exc:
            raise ScriptTypeError(exc.func, exc.got, *self.where) from None
        except RegexError as exc:
            raise ScriptRuntimeError(f"{name}: bad pattern: {exc}", *self.where) from None
        except TypeError as exc:  # wrong arity through map/filter
            raise ScriptTypeError(name, str(exc), *self.where) from None
        if isinstance(out, list):
            self.container(out, out)
        return out


class _Evaluator:
    def __init__(self, ctx: _Context, env: dict[str, Any]):
        self.ctx = ctx
        self.env = env

    def at(self, node: ast.Node) -> None:
        self.ctx.where = (node.line, node.col)

    def run_block(self, stmts: tuple) -> None:
        for s in stmts:
            self.run(s)

    def run(self, s) -> None:
        self.at(s)
        if isinstance(s, (ast.Let, ast.Assign)):
            self.env[s.name] = self.eval(s.value)
        elif isinstance(s, ast.Return):
            raise _Return(self.eval(s.value))
        elif isinstance(s, ast.If):
            if self.truth(self.eval(s.test), "if", s):
                self.run_block(s.body)
            else:
                self.run_block(s.orelse)
        elif isinstance(s, ast.While):
            while True:
                self.at(s)
                self.ctx.tick()
                if not self.truth(self.eval(s.test), "while", s):
                    break
                self.run_block(s.body)
        elif isinstance(s, ast.For):
            coll = self.eval(s.iterable)
            if isinstance(coll, dict):
                items = list(coll.keys())
            elif isinstance(coll, (list, tuple)):
                items = list(coll)
            else:
                raise ScriptTypeError("for", type_tag(coll), s.line, s.col)
            for item in items:
                self.at(s)
                self.ctx.tick()
                self.env[s.var] = item
                self.run_block(s.body)
        else:  # pragma: no cover
            raise AssertionError(type(s))

    def truth(self, v: Any, op: str, node: ast.Node) -> bool:
        if not isinstance(v, bool):
            raise ScriptTypeError(op, f"{type_tag(v)} condition", node.line, node.col)
        return v

    def eval(self, e) -> Any:
        if isinstance(e, ast.Lit):
            return e.value
        if isinstance(e, ast.Var):
            try:
                return self.env[e.name]
            except KeyError:
                raise ScriptRuntimeError(f"name {e.name!r} is not bound here", e.line, e.col) from None
        if isinstance(e, ast.Binary):
            return self.binary(e)
        if isinstance(e, ast.Unary):
            v = self.eval(e.operand)
            self.at(e)
            self.ctx.tick()
            if e.op == "!":
                return not self.truth(v, "!", e)
            if not _num(v):
                raise ScriptTypeError("unary -", type_tag(v), e.line, e.col)
            return self.int_range(-v, e)
        if isinstance(e, ast.Cond):
            test = self.eval(e.test)
            self.at(e)
            self.ctx.tick()
            return self.eval(e.then) if self.truth(test, "?:", e) else self.eval(e.orelse)
        if isinstance(e, ast.Field):
            target = self.eval(e.target)
            if isinstance(target, Mapping):
                return target.get(e.name)
            raise ScriptTypeError(f".{e.name}", type_tag(target), e.line, e.col)
        if isinstance(e, ast.ListLit):
            items = [self.eval(x) for x in e.items]
            self.at(e)
            return self.ctx.container(self.ctx.collection(items), items)
        if isinstance(e, ast.RecordLit):
            rec = {k: self.eval(v) for k, v in e.fields}
            self.at(e)
            return self.ctx.container(self.ctx.collection(rec), rec.values())
        if isinstance(e, ast.Call):
            args = tuple(self.eval(a) for a in e.args)
            self.at(e)
            return self.ctx.apply(e.func, args)
        if isinstance(e, ast.ToolCall):
            return self.tool(e)
        raise AssertionError(type(e))  # pragma: no cover

    def tool(self, e: ast.ToolCall) -> Any:
        args = [self.eval(a) for a in e.args]
        self.at(e)
        self.ctx.tick()
        tool = self.ctx.registry.get(e.tool)
        if tool is None:
            raise UnknownTool(e.tool, e.line, e.col)
        if tool.arity is not None and len(args) != tool.arity:
            raise ScriptTypeError(f'call("{e.tool}")', f"{len(args)} argument(s), expected {tool.arity}", e.line, e.col)
        try:
            return tool.fn(args, self.ctx.ledger)
        except Exception as exc:
            raise ToolError(e.tool, exc, e.line, e.col) from exc

    def int_range(self, v: Any, e: ast.Node) -> Any:
        if isinstance(v, int) and not INT_MIN <= v <= INT_MAX:
            raise ScriptRuntimeError("integer overflow", e.line, e.col)
        return v

    def binary(self, e: ast.Binary) -> Any:
        op = e.op
        if op in ("&&", "||"):
            left = self.truth(self.eval(e.left), op, e)
            self.at(e)
            self.ctx.tick()
            if op == "&&" and not left:
                return False
            if op == "||" and left:
                return True
            return self.truth(self.eval(e.right), op, e)
        a = self.eval(e.left)
        b = self.eval(e.right)
        self.at(e)
        self.ctx.tick()
        if op == "==":
            return self.ctx.equal(a, b)
        if op == "!=":
            return not self.ctx.equal(a, b)
        got = f"{type_tag(a)}, {type_tag(b)}"
        if op in ("<", "<=", ">", ">="):
            if not ((_num(a) and _num(b)) or (isinstance(a, str) and isinstance(b, str))):
                raise ScriptTypeError(op, got, e.line, e.col)
            return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
        if op == "+":
            if isinstance(a, str) and isinstance(b, str):
                return self.ctx.text(a + b)
            if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
                out = self.ctx.collection([*a, *b])
                return self.ctx.container(out, out)
        if not (_num(a) and _num(b)):
            raise ScriptTypeError(op, got, e.line, e.col)
        if op == "+":
            return self.int_range(a + b, e)
        if op == "-":
            return self.int_range(a - b, e)
        if op == "*":
            return self.int_range(a * b, e)
        if op == "/":
            if b == 0:
                raise ScriptRuntimeError("division by zero", e.line, e.col)
            return a / b
        if op == "%":
            if not (isinstance(a, int) and isinstance(b, int)):
                raise ScriptTypeError(op, got, e.line, e.col)
            if b == 0:
                raise ScriptRuntimeError("modulo by zero", e.line, e.col)
            return a % b
        raise AssertionError(op)  # pragma: no cover


def evaluate(
    script: Script,
    input: Any,
    registry: ToolRegistry | None = None,
    limits: Limits | None = None,
    ledger: CostLedger | None = None,
    context: Any = None,
) -> Any:
    """Run ``script`` with ``input`` bound; returns the ``return`` value (Null if none)."""
    if isinstance(input, Table):
        raise ScriptTypeError("input", "table (scripts operate on records, lists and scalars)")
    ctx = _Context(limits or Limits(), registry or ToolRegistry(), ledger or CostLedger())
    ev = _Evaluator(ctx, {"input": input, "context": context})
    try:
        ev.run_block(script.body)
    except _Return as r:
        return r.value
    except RecursionError:
        raise ResourceLimitExceeded("evaluation nested too deeply", *ctx.where) from None
    return None
