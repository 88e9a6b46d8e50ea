"""Sandboxed script language for generated modules.

Scripts see their input, pure builtins, and whatever tools the registry
grants; there is no file, network or process access to reach for.
"""

from curaflow.script.builtins import SIGNATURES
from curaflow.script.interp import (
    Limits,
    ResourceLimitExceeded,
    ScriptRuntimeError,
    ScriptTypeError,
    StepLimitExceeded,
    Tool,
    ToolError,
    ToolRegistry,
    UnknownTool,
    evaluate,
)
from curaflow.script.parser import Script, ScriptError, ScriptParseError
from curaflow.script.parser import parse_script as _parse


def parse_script(source: str) -> Script:
    try:
        return _parse(source)
    except RecursionError:
        raise ScriptParseError("script nested too deeply") from None


GRAMMAR = """\
statements:
  let NAME = expr;            declare a variable
  NAME = expr;                reassign a declared variable
  if (cond) { ... } else { ... }
  while (cond) { ... }
  for (NAME in list_or_record) { ... }
  return expr;
expressions:
  literals: 12, 3.5, "text", true, false, null, [a, b], {field: value}
  input (the module input), NAME, expr.field
  cond ? a : b, ||, &&, == !=, < <= > >=, + - * / %, !x, -x
  builtin(args...), call("tool", args...)
conditions must be booleans; a missing record field reads as null."""

__all__ = [
    "GRAMMAR",
    "Limits",
    "ResourceLimitExceeded",
    "SIGNATURES",
    "Script",
    "ScriptError",
    "ScriptParseError",
    "ScriptRuntimeError",
    "ScriptTypeError",
    "StepLimitExceeded",
    "Tool",
    "ToolError",
    "ToolRegistry",
    "UnknownTool",
    "evaluate",
    "parse_script",
]
