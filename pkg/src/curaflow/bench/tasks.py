"""End-to-end benchmark tasks: run a built-in pipeline, then score it."""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from curaflow.bench.csvio import load_csv
from curaflow.bench.metrics import EvalResult, eval_er, eval_imputation, eval_ner
from curaflow.compiler import compile_pipeline, template_instantiate
from curaflow.dsl import PipelineSpec, parse_pipeline
from curaflow.executor import RunReport, run
from curaflow.llm import describe_backend
from curaflow.llm.base import Backend
from curaflow.model import CostLedger, Table, loads

# Baseline for imputation: one LLM call per record, no generated rule.
PURE_LLM_IMPUTATION = '''\
pipeline imputation_pure_llm {
  param output = "imputed_pure_llm.csv";

  node load: load_csv(path=${data}, schema="title:text,manufacturer:text", in="none", out="table");
  node impute: impute(in="record", out="text")
    llm(prompt="""Which company manufactures this product?
Product: {{input.title}}
Answer with the company name only.""");
  node save: save_csv(path=${output}, column="manufacturer", in="table", out="table");

  load -> impute -> save;
}
'''

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


def _settings(result: EvalResult, backend: Backend, seed: int | None) -> EvalResult:
    result.settings = {"backend": describe_backend(backend), "seed": seed}
    return result


@dataclass
class TaskRun:
    result: EvalResult
    report: RunReport
    predictions: list


def parse_label(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in _TRUE:
        return True
    if s in _FALSE:
        return False
    raise ValueError(f"not a 0/1 label: {v!r}")


def _column(table: Table, name: str) -> list:
    if name not in table.schema.names:
        raise ValueError(f"expected a column {name!r}, found {table.schema.names}")
    return [r[name] for r in table.rows]


def _execute(spec: PipelineSpec, backend: Backend, ledger: CostLedger | None, output: str, seed: int | None) -> tuple[Table, RunReport]:
    plan = compile_pipeline(spec, backend=backend, ledger=ledger, params={"output": output})
    outputs, report = run(plan, mode="per_record", backend_kind=type(backend).__name__, seed=seed)
    (sink,) = outputs.values()
    return sink, report


def _workdir(output_dir: str | None):
    return tempfile.TemporaryDirectory() if output_dir is None else _Keep(output_dir)


class _Keep:
    def __init__(self, path: str):
        self.path = path

    def __enter__(self) -> str:
        Path(self.path).mkdir(parents=True, exist_ok=True)
        return self.path

    def __exit__(self, *exc) -> None:
        return None


def _dataset(path: str, dataset: str | None) -> str:
    return dataset if dataset else Path(path).resolve().parent.name


def run_er(
    pairs: str,
    backend: Backend,
    *,
    gold: str | None = None,
    left: str = "",
    right: str = "",
    dataset: str | None = None,
    ledger: CostLedger | None = None,
    output_dir: str | None = None,
    seed: int | None = None,
) -> TaskRun:
    """Label every candidate pair and score against the gold labels.

    Gold labels come from ``gold`` (a CSV with a ``label`` column aligned
    with the pairs) or else from the pair list's own ``label`` column.
    """
    spec = template_instantiate("entity_resolution", {"data": pairs, "left": left, "right": right})
    with _workdir(output_dir) as d:
        table, report = _execute(spec, backend, ledger, str(Path(d) / "er_labels.csv"), seed)
    preds = [bool(v) for v in _column(table, "match")]
    labels = [parse_label(v) for v in _column(load_csv(gold or pairs), "label")]
    return TaskRun(_settings(eval_er(preds, labels, _dataset(pairs, dataset), report.ledger), backend, seed), report, preds)


def run_imputation(
    data: str,
    gold: str,
    backend: Backend,
    *,
    baseline: bool = False,
    dataset: str | None = None,
    ledger: CostLedger | None = None,
    output_dir: str | None = None,
    seed: int | None = None,
) -> TaskRun:
    """Impute manufacturers, either with the generated-rule pipeline or with
    one LLM call per record (``baseline``)."""
    if baseline:
        spec = parse_pipeline(PURE_LLM_IMPUTATION)
        spec.params["data"] = data
    else:
        spec = template_instantiate("data_imputation", {"data": data})
    with _workdir(output_dir) as d:
        table, report = _execute(spec, backend, ledger, str(Path(d) / "imputed.csv"), seed)
    preds = _column(table, "impute")
    truth = _column(load_csv(gold), "manufacturer")
    name = _dataset(data, dataset) + (" (pure LLM)" if baseline else "")
    return TaskRun(_settings(eval_imputation(preds, truth, name, report.ledger), backend, seed), report, preds)


def _gold_names(cell: Any) -> list[str]:
    return [s.strip() for s in (cell or "").split(";") if s.strip()]


def run_ner(
    docs: str,
    gold: str,
    backend: Backend,
    *,
    dataset: str | None = None,
    ledger: CostLedger | None = None,
    output_dir: str | None = None,
    seed: int | None = None,
) -> TaskRun:
    """Extract person names per passage; gold is a CSV ``id,names`` with
    names separated by semicolons."""
    spec = template_instantiate("name_extraction", {"data": docs})
    with _workdir(output_dir) as d:
        table, report = _execute(spec, backend, ledger, str(Path(d) / "names.json"), seed)
    preds = [loads(v) if isinstance(v, str) else [] for v in _column(table, "tag")]
    truth = [_gold_names(v) for v in _column(load_csv(gold), "names")]
    return TaskRun(_settings(eval_ner(preds, truth, _dataset(docs, dataset), report.ledger), backend, seed), report, preds)
