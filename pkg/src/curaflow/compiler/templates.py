"""Named, parameterized pipelines shipped as ``.lm`` files.

A template file starts with a comment block::

    # name: entity_resolution
    # description: one line
    # param: data required - what the parameter means
    # param: output - optional parameters take their default from the body

followed by an ordinary pipeline whose ``${...}`` references name the
declared parameters.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from curaflow.dsl.parser import parse_pipeline
from curaflow.dsl.spec import PipelineSpec

BUILTIN_DIR = Path(__file__).resolve().parent.parent / "templates"

_PARAM = re.compile(r"^(\w+)(\s+required)?\s*(?:-\s*(.*))?$")


class TemplateError(ValueError):
    pass


class UnknownTemplate(TemplateError):
    def __init__(self, name: str):
        super().__init__(f"no template named {name!r}")
        self.name = name


class MissingParam(TemplateError):
    def __init__(self, template: str, names: list[str]):
        super().__init__(f"template {template!r} needs parameter(s): {', '.join(names)}")
        self.template = template
        self.names = names


@dataclass(frozen=True)
class TemplateParam:
    name: str
    required: bool = False
    doc: str = ""


@dataclass
class Template:
    name: str
    description: str
    params: list[TemplateParam] = field(default_factory=list)
    body: str = ""
    path: Path | None = None

    @classmethod
    def parse(cls, text: str, path: Path | None = None) -> "Template":
        name = description = None
        params = []
        for line in text.splitlines():
            s = line.strip()
            if not s:
                continue
            if not s.startswith("#"):
                break
            key, _, value = s.lstrip("#").strip().partition(":")
            value = value.strip()
            if key == "name":
                name = value
            elif key == "description":
                description = value
            elif key == "param":
                m = _PARAM.match(value)
                if not m:
                    raise TemplateError(f"bad param line {s!r}")
                params.append(TemplateParam(m.group(1), bool(m.group(2)), (m.group(3) or "").strip()))
        if not name:
            raise TemplateError(f"{path or 'template'}: missing '# name:' line")
        return cls(name, description or "", params, text, path)

    def instantiate(self, assignment: dict[str, Any] | None = None) -> PipelineSpec:
        assignment = dict(assignment or {})
        declared = {p.name for p in self.params}
        unknown = sorted(set(assignment) - declared)
        if unknown:
            raise TemplateError(f"template {self.name!r} has no parameter(s) {', '.join(unknown)}")
        missing = [p.name for p in self.params if p.required and assignment.get(p.name) is None]
        if missing:
            raise MissingParam(self.name, missing)
        spec = parse_pipeline(self.body)
        spec.params.update(assignment)
        return spec


def load_templates(paths: Iterable[str | Path] = ()) -> dict[str, Template]:
    """Built-in templates, then each search path in order (later ones win)."""
    out: dict[str, Template] = {}
    for folder in [BUILTIN_DIR, *map(Path, paths)]:
        if not folder.is_dir():
            continue
        for f in sorted(folder.glob("*.lm")):
            t = Template.parse(f.read_text(encoding="utf-8"), f)
            out[t.name] = t
    return out


def template_list(paths: Iterable[str | Path] = ()) -> list[tuple[str, str]]:
    return [(t.name, t.description) for t in sorted(load_templates(paths).values(), key=lambda t: t.name)]


def get_template(name: str, paths: Iterable[str | Path] = ()) -> Template:
    templates = load_templates(paths)
    if name not in templates:
        raise UnknownTemplate(name)
    return templates[name]


def template_instantiate(name: str, assignment: dict[str, Any] | None = None, paths: Iterable[str | Path] = ()) -> PipelineSpec:
    return get_template(name, paths).instantiate(assignment)
