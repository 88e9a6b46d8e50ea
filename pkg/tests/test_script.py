from __future__ import annotations

import math
import random

import pytest

from curaflow.model import INT_MAX, INT_MIN, CostLedger
from curaflow.script import (
    Limits,
    ResourceLimitExceeded,
    ScriptError,
    ScriptParseError,
    ScriptRuntimeError,
    ScriptTypeError,
    StepLimitExceeded,
    Tool,
    ToolError,
    ToolRegistry,
    UnknownTool,
    evaluate,
    parse_script,
)


def run(src, value=None, **kw):
    return evaluate(parse_script(src), value, **kw)


# -- parsing -----------------------------------------------------------------


def test_parse_examples():
    assert len(parse_script("return lower(input.name);").body) == 1
    assert len(parse_script('let x = split(input, " "); return len(x);').body) == 2
    with pytest.raises(ScriptParseError) as e:
        parse_script("return (1 +;")
    assert (e.value.line, e.value.col) == (1, 12)


@pytest.mark.parametrize(
    "src",
    ["let = 3;", "return 1", "if (true) { return 1; ", "x + ;", "return foo(1);", 'return call(tool, 1);', "fn f() {}", "return 1 +* 2;", "return y;"],
)
def test_parse_rejects(src):
    with pytest.raises(ScriptParseError):
        parse_script(src)


def test_deep_nesting_is_a_parse_error():
    with pytest.raises(ScriptParseError):
        parse_script("return " + "(" * 5000 + "1" + ")" * 5000 + ";")


# -- evaluation --------------------------------------------------------------


def test_builtin_examples():
    assert run("return lower(input.name);", {"name": "SONY"}) == "sony"
    assert run('return join(map(split(input), "upper"), "-");', "a b  c") == "A-B-C"
    assert run('return filter(input, "contains", "o");', ["foo", "bar", "boo"]) == ["foo", "boo"]
    assert run('return get(input, 5, "none");', [1, 2]) == "none"
    assert run("return get(input, -1);", [1, 2]) == 2
    assert run('return replace(trim(input), "a", "o");', "  banana ") == "bonono"
    assert run('return regex_findall(input, "[0-9]+");', "a1 b22 c333") == ["1", "22", "333"]
    assert run("return {b: 1, a: [input]};", 3) == {"b": 1, "a": [3]}
    assert list(run("return {b: 1, a: 2};")) == ["b", "a"]


def test_control_flow():
    src = """
    let total = 0;
    for (x in input) {
      if (x % 2 == 0) { total = total + x; } else { total = total - 1; }
    }
    let i = 0;
    while (i < 3) { i = i + 1; }
    return total * i;
    """
    assert run(src, [1, 2, 3, 4]) == (6 - 2) * 3


def test_semantics_of_numbers_and_nulls():
    assert run("return 7 / 2;") == 3.5
    assert run("return 4 / 2;") == 2.0 and isinstance(run("return 4 / 2;"), float)
    assert run("return -7 % 3;") == 2
    assert run("return 1 == 1.0;") is True
    assert run("return input.missing == null;", {}) is True
    assert run("return true ? 1 : 2;") == 1
    assert run("return false && (1 / 0 == 1);") is False


@pytest.mark.parametrize(
    "src, value, error",
    [
        ("return 1 + \"a\";", None, ScriptTypeError),
        ("if (1) { return 1; }", None, ScriptTypeError),
        ("return 1.5 % 2;", None, ScriptTypeError),
        ("return 1 / 0;", None, ScriptRuntimeError),
        ("return 5 % 0;", None, ScriptRuntimeError),
        (f"return {INT_MAX} + 1;", None, ScriptRuntimeError),
        ("return input.a.b;", {"a": 3}, ScriptTypeError),
        ('return lower(3);', None, ScriptTypeError),
        ('return map([1], "nope");', None, ScriptError),
    ],
)
def test_runtime_errors(src, value, error):
    with pytest.raises(error) as e:
        run(src, value)
    assert e.value.line >= 1


def test_step_limit_example():
    with pytest.raises(StepLimitExceeded) as e:
        run("let i = 0; while (true) { i = i + 1; } return i;", limits=Limits(max_steps=10_000))
    assert e.value.line == 1


def test_resource_limits():
    with pytest.raises(ResourceLimitExceeded):
        run('let s = "ab"; while (true) { s = s + s; }', limits=Limits(max_string_len=1000))
    with pytest.raises(ResourceLimitExceeded):
        run("let l = [1]; while (true) { l = l + l; }", limits=Limits(max_collection_size=1000))
    with pytest.raises(ResourceLimitExceeded):
        run("let l = []; while (true) { l = [l]; }")


def test_table_input_rejected():
    from curaflow.model import Schema, Table

    with pytest.raises(ScriptTypeError):
        run("return 1;", Table(Schema.parse("a"), ()))


def test_limits_positive():
    with pytest.raises(ValueError):
        Limits(max_steps=0)


def counting_tool(calls):
    def fn(args, ledger):
        calls.append(args)
        ledger.record_call("impute:tool:llm_impute")
        return "Other"

    return Tool(fn, arity=1, kind="llm")


def test_tool_routing_and_ledger():
    calls = []
    reg = ToolRegistry({"llm_impute": counting_tool(calls)})
    src = 'return contains(lower(input.desc), "playstation") ? "Sony" : call("llm_impute", input);'
    led = CostLedger()
    assert run(src, {"desc": "Sony PlayStation 5"}, registry=reg, ledger=led) == "Sony"
    assert led.llm_calls == 0
    assert run(src, {"desc": "kettle"}, registry=reg, ledger=led) == "Other"
    assert led.llm_calls == 1 and len(calls) == 1


def test_tool_errors():
    with pytest.raises(UnknownTool):
        run('return call("nope", 1);')

    def boom(args, ledger):
        raise RuntimeError("down")

    reg = ToolRegistry({"t": Tool(boom)})
    with pytest.raises(ToolError) as e:
        run('return call("t", 1);', registry=reg)
    assert isinstance(e.value.wrapped, RuntimeError)
    with pytest.raises(ScriptTypeError):
        run('return call("t", 1, 2);', registry=reg)


def test_registry_signatures():
    reg = ToolRegistry({"llm_impute": Tool(lambda a, l: None, "text", "text", description="ask")})
    assert reg.names() == ["llm_impute"]
    assert reg.signatures() == ['call("llm_impute", x: text) -> text  # ask']


def test_deterministic():
    src = 'let out = []; for (w in split(input)) { out = append(out, upper(w)); } return out;'
    s = parse_script(src)
    assert evaluate(s, "a b c") == evaluate(s, "a b c") == ["A", "B", "C"]


# -- arithmetic oracle ---------------------------------------------------------


class OracleError(Exception):
    def __init__(self, kind):
        self.kind = kind


def gen_expr(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.6:
            return ("int", rng.randint(0, 12))
        if r < 0.7:
            return ("int", rng.choice([2**31, 2**62, INT_MAX]))
        return ("float", rng.randint(0, 40) / 4)
    if rng.random() < 0.1:
        return ("neg", gen_expr(rng, depth - 1))
    return (rng.choice("+-*/%"), gen_expr(rng, depth - 1), gen_expr(rng, depth - 1))


def render(e):
    if e[0] in ("int", "float"):
        return repr(e[1])
    if e[0] == "neg":
        return f"(-{render(e[1])})"
    return f"({render(e[1])} {e[0]} {render(e[2])})"


def checked(v):
    if isinstance(v, int) and not INT_MIN <= v <= INT_MAX:
        raise OracleError("runtime")
    return v


def oracle(e):
    kind = e[0]
    if kind in ("int", "float"):
        return e[1]
    if kind == "neg":
        return checked(-oracle(e[1]))
    a, b = oracle(e[1]), oracle(e[2])
    if kind == "+":
        return checked(a + b)
    if kind == "-":
        return checked(a - b)
    if kind == "*":
        return checked(a * b)
    if kind == "/":
        if b == 0:
            raise OracleError("runtime")
        return a / b
    if not (isinstance(a, int) and isinstance(b, int)):
        raise OracleError("type")
    if b == 0:
        raise OracleError("runtime")
    return a % b


def test_arithmetic_oracle_1000_trees():
    rng = random.Random(2024)
    kinds = {"ok": 0, "runtime": 0, "type": 0}
    for _ in range(1000):
        e = gen_expr(rng, rng.randint(1, 6))
        src = f"return {render(e)};"
        try:
            want = ("ok", oracle(e))
        except OracleError as exc:
            want = (exc.kind, None)
        try:
            got = ("ok", run(src))
        except ScriptRuntimeError:
            got = ("runtime", None)
        except ScriptTypeError:
            got = ("type", None)
        kinds[want[0]] += 1
        assert got[0] == want[0], src
        if want[0] == "ok":
            a, b = got[1], want[1]
            assert type(a) is type(b), src
            assert a == b or (math.isnan(a) and math.isnan(b)), src
    assert all(kinds.values())


# -- adversarial termination -----------------------------------------------------

PRELUDE = 'let i = 0; let s = "ab"; let l = [1, 2]; let r = {k: 1};\n'


def gen_stmt(rng, depth):
    options = [
        lambda: "i = i + 1;",
        lambda: "i = i * 3 + 1;",
        lambda: "s = s + s;",
        lambda: "l = l + l;",
        lambda: "l = append(l, l);",
        lambda: "l = [l, l];",
        lambda: 'r = {k: r, j: l};',
        lambda: 's = join(map(split(s, "a"), "upper"), s);',
        lambda: "i = len(s) % 7;",
        lambda: 'i = len(regex_findall(s, "(a|b)*b"));',
        lambda: "return i;",
        lambda: "i = 1 / i;",
        lambda: 'l = filter(l, "contains", 1);',
    ]
    if depth > 0:
        body = lambda: " ".join(gen_stmt(rng, depth - 1) for _ in range(rng.randint(1, 3)))
        options += [
            lambda: f"while (true) {{ {body()} }}",
            lambda: f"while (i < 1000000) {{ {body()} }}",
            lambda: f"for (x in l) {{ l = append(l, x); {body()} }}",
            lambda: f"if (i % 2 == 0) {{ {body()} }} else {{ {body()} }}",
            lambda: f"while (len(s) > 0) {{ {body()} }}",
        ]
    return rng.choice(options)()


def test_adversarial_scripts_terminate():
    rng = random.Random(99)
    limits = Limits(max_steps=5000, max_string_len=10_000, max_collection_size=2000)
    outcomes = set()
    for _ in range(1000):
        src = PRELUDE + " ".join(gen_stmt(rng, 3) for _ in range(rng.randint(1, 4)))
        try:
            run(src, limits=limits)
            outcomes.add("returned")
        except ScriptError as exc:
            outcomes.add(type(exc).__name__)
    assert {"returned", "StepLimitExceeded", "ResourceLimitExceeded"} <= outcomes
