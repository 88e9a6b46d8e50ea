"""Command-line interface.

Exit codes: 0 success; 1 the pipeline could not be read, parsed, validated
or compiled (or a validator failed under ``validate``); 2 failure while
running, including backend errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from curaflow.bench.report import FORMATS, emit_report
from curaflow.bench.tasks import run_er, run_imputation, run_ner
from curaflow.compiler import CompileError, GenerationFailed, InvalidPipeline, compile_pipeline
from curaflow.compiler.templates import TemplateError, get_template, template_list
from curaflow.dsl import ParseError, parse_pipeline, validate_graph
from curaflow.executor import MODES, ExecutionError, outputs_json, run
from curaflow.llm import BackendUnavailable, MockExhausted, backend_from_selector
from curaflow.model import CostLedger
from curaflow.script import Limits, ScriptParseError

CONFIG_FILE = "curation.toml"
OK, USAGE_ERROR, RUNTIME_ERROR = 0, 1, 2


class CliError(Exception):
    def __init__(self, message: str, code: int = USAGE_ERROR):
        super().__init__(message)
        self.code = code


@dataclass
class CliConfig:
    backend: str | None = None
    seed: int = 0
    report: str | None = None
    template_paths: list[str] = field(default_factory=list)
    limits: dict[str, int] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path = CONFIG_FILE) -> "CliConfig":
        p = Path(path)
        if not p.exists():
            return cls()
        try:
            raw = tomllib.loads(p.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise CliError(f"{p}: {exc}") from None
        unknown = sorted(set(raw) - {"backend", "seed", "report", "template_paths", "limits"})
        if unknown:
            raise CliError(f"{p}: unknown key(s) {', '.join(unknown)}")
        return cls(
            raw.get("backend"),
            int(raw.get("seed", 0)),
            raw.get("report"),
            [str(x) for x in raw.get("template_paths", [])],
            {k: int(v) for k, v in raw.get("limits", {}).items()},
        )

    def make_limits(self) -> Limits:
        try:
            return Limits(**self.limits)
        except TypeError as exc:
            raise CliError(f"bad [limits] entry: {exc}") from None


def _binding_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_bindings(items: Sequence[str]) -> dict[str, Any]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise CliError(f"--data expects key=value, got {item!r}")
        out[key.strip()] = _binding_value(value)
    return out


def _config(args) -> CliConfig:
    cfg = CliConfig.load(args.config)
    if getattr(args, "backend", None):
        cfg.backend = args.backend
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "report", None):
        cfg.report = args.report
    cfg.template_paths += getattr(args, "template_path", None) or []
    return cfg


def _backend(cfg: CliConfig, required: bool = True):
    if not cfg.backend:
        if required:
            raise CliError("no backend selected; pass --backend or set backend in " + CONFIG_FILE)
        return None
    try:
        return backend_from_selector(cfg.backend, seed=cfg.seed)
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"backend {cfg.backend!r}: {exc}") from None


def _read_pipeline(path: str):
    p = Path(path)
    if not p.is_file():
        raise CliError(f"pipeline file not found: {path}")
    try:
        spec = parse_pipeline(p.read_text(encoding="utf-8"))
    except ParseError as exc:
        raise CliError(f"{path}:{exc}") from None
    diags = validate_graph(spec)
    if diags:
        raise CliError(f"{path}: " + str(InvalidPipeline(diags)))
    return spec


def _compile(args, cfg: CliConfig, *, run_validators: bool = True, backend_required: bool = True):
    spec = _read_pipeline(args.pipeline)
    backend = _backend(cfg, required=backend_required)
    ledger = CostLedger()
    try:
        plan = compile_pipeline(
            spec,
            backend=backend,
            ledger=ledger,
            params=parse_bindings(args.data),
            limits=cfg.make_limits(),
            run_validators=run_validators,
        )
    except (BackendUnavailable, MockExhausted) as exc:
        raise CliError(f"backend failure while compiling: {exc}", RUNTIME_ERROR) from None
    except GenerationFailed as exc:
        raise CliError(f"node {exc.node!r}: {exc}") from None
    except CompileError as exc:
        where = f"node {exc.node!r}: " if exc.node else ""
        raise CliError(f"{args.pipeline}: {where}{exc}") from None
    except ScriptParseError as exc:
        raise CliError(f"{args.pipeline}: {exc}") from None
    return plan


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_run(args) -> int:
    cfg = _config(args)
    plan = _compile(args, cfg)
    for nid, rep in plan.reports.items():
        if not rep.passed:
            print(f"warning: node {nid!r} validator {rep.summary()}", file=sys.stderr)
    try:
        outputs, report = run(plan, mode=args.mode, skip_errors=args.skip_errors, backend_kind=cfg.backend or "", seed=cfg.seed)
    except ExecutionError as exc:
        raise CliError(str(exc), RUNTIME_ERROR) from None
    except (BackendUnavailable, MockExhausted) as exc:
        raise CliError(f"backend failure: {exc}", RUNTIME_ERROR) from None
    _write(args.output, outputs_json(outputs))
    if cfg.report:
        Path(cfg.report).write_text(report.dumps(timings=args.timings), encoding="utf-8")
    print(f"run {report.run_id}: {report.ledger['llm_calls']} llm call(s), mode {report.mode}", file=sys.stderr)
    return OK


def cmd_compile(args) -> int:
    cfg = _config(args)
    plan = _compile(args, cfg, run_validators=not args.skip_validators, backend_required=False)
    if args.explain:
        print(plan.explain())
    else:
        print(f"compiled {plan.spec.name}: {len(plan)} module(s)")
    return OK


def cmd_validate(args) -> int:
    cfg = _config(args)
    plan = _compile(args, cfg)
    wanted = set(args.node or plan.reports)
    missing = sorted(wanted - set(plan.reports))
    if missing:
        raise CliError(f"no validator on node(s) {', '.join(missing)}")
    failed = False
    result = {}
    for nid in plan.order:
        if nid in wanted:
            rep = plan.reports[nid]
            failed |= not rep.passed
            result[nid] = rep.to_json() if args.json else rep.summary()
    if args.json:
        print(json.dumps(result, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        for nid, line in result.items():
            print(f"{nid}: {line}")
    return USAGE_ERROR if failed else OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    backend = _backend(cfg)
    common = {"dataset": args.dataset, "output_dir": args.output_dir, "seed": cfg.seed}
    for p in [v for k, v in vars(args).items() if k in ("pairs", "gold", "data", "docs", "left", "right") and v]:
        if not Path(p).is_file():
            raise CliError(f"file not found: {p}")
    try:
        if args.task == "er":
            results = [run_er(args.pairs, backend, gold=args.gold, left=args.left, right=args.right, **common).result]
        elif args.task == "imputation":
            results = [run_imputation(args.data, args.gold, backend, **common).result]
            if args.baseline:
                baseline = backend_from_selector(cfg.backend, seed=cfg.seed)
                results.append(run_imputation(args.data, args.gold, baseline, baseline=True, **common).result)
        else:
            results = [run_ner(args.docs, args.gold, backend, **common).result]
    except (CompileError, GenerationFailed, TemplateError) as exc:
        raise CliError(str(exc)) from None
    except (ExecutionError, BackendUnavailable, MockExhausted) as exc:
        raise CliError(str(exc), RUNTIME_ERROR) from None
    text = emit_report(results, args.format)
    _write(None, text)
    if cfg.report:
        Path(cfg.report).write_text(emit_report(results, "json"), encoding="utf-8")
    return OK


def cmd_templates(args) -> int:
    cfg = _config(args)
    if args.action == "list":
        for name, desc in template_list(cfg.template_paths):
            print(f"{name}\t{desc}")
        return OK
    if not args.name:
        raise CliError("templates show needs a template name")
    try:
        t = get_template(args.name, cfg.template_paths)
    except TemplateError as exc:
        raise CliError(str(exc)) from None
    sys.stdout.write(t.body if t.body.endswith("\n") else t.body + "\n")
    return OK


def _pipeline_args(p: argparse.ArgumentParser, backend: bool = True) -> None:
    p.add_argument("pipeline", help="pipeline file (.lm)")
    p.add_argument("--data", action="append", default=[], metavar="KEY=VALUE", help="bind a pipeline parameter")
    if backend:
        p.add_argument("--backend", help="mock:<script.json> | http:<config.json> | cached:<cache.jsonl>+<backend>")
        p.add_argument("--seed", type=int, default=None)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; here 2 is reserved for runtime failures."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="curaflow", description="Compile and run LLM-assisted data curation pipelines.")
    parser.add_argument("--config", default=CONFIG_FILE, help=f"configuration file (default ./{CONFIG_FILE})")
    parser.add_argument("--template-path", action="append", default=[], help="extra template folder")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="compile and run a pipeline")
    _pipeline_args(p)
    p.add_argument("--report", help="write the run report (JSON) here")
    p.add_argument("--output", help="write outputs (JSON) here instead of standard output")
    p.add_argument("--mode", choices=MODES, default="auto")
    p.add_argument("--skip-errors", action="store_true", help="record failing records and continue")
    p.add_argument("--timings", action="store_true", help="include wall-clock times in the report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compile", help="compile a pipeline without running it")
    _pipeline_args(p)
    p.add_argument("--explain", action="store_true", help="print the physical plan")
    p.add_argument("--skip-validators", action="store_true", help="do not run validator test cases")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("validate", help="run validator repair loops and print their reports")
    _pipeline_args(p)
    p.add_argument("--node", action="append", help="only these nodes")
    p.add_argument("--json", action="store_true", help="full reports as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="run a benchmark task and print its report")
    bsub = p.add_subparsers(dest="task", required=True, parser_class=_Parser)
    for task in ("er", "imputation", "ner"):
        b = bsub.add_parser(task)
        b.add_argument("--backend")
        b.add_argument("--seed", type=int, default=None)
        b.add_argument("--report", help="also write the JSON report here")
        b.add_argument("--format", choices=FORMATS, default="markdown")
        b.add_argument("--dataset", help="dataset name shown in the report")
        b.add_argument("--output-dir", help="keep pipeline output files here")
        if task == "er":
            b.add_argument("--pairs", required=True, help="CSV left_id,right_id[,label]")
            b.add_argument("--gold", help="CSV with a label column (default: the pairs' label column)")
            b.add_argument("--left", default="", help="left entity CSV (default: left.csv beside the pairs)")
            b.add_argument("--right", default="", help="right entity CSV (default: right.csv beside the pairs)")
        elif task == "imputation":
            b.add_argument("--data", required=True, help="CSV title,manufacturer")
            b.add_argument("--gold", required=True, help="CSV with the true manufacturer column")
            b.add_argument("--baseline", action="store_true", help="also run one LLM call per record")
        else:
            b.add_argument("--docs", required=True, help="CSV id,text")
            b.add_argument("--gold", required=True, help="CSV id,names with names separated by ';'")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("templates", help="list or show built-in templates")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_templates)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
