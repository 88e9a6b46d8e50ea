from __future__ import annotations

import os

import pytest

from curaflow.compiler import CustomRegistry, compile_pipeline
from curaflow.dsl import parse_pipeline
from curaflow.executor import ExecutionError, ModuleError, ShapeMismatch, outputs_json, run
from curaflow.llm import MockBackend
from curaflow.model import CostLedger, Schema, Table

from conftest import FIXTURES, mock

ER_MOCK = FIXTURES / "er" / "er_mock.json"


def test_identity_whole_mode():
    plan = compile_pipeline(parse_pipeline('pipeline p { node a: identity(in="text", out="text"); }'))
    out, report = run(plan, {"a": "hi"})
    assert out == {"a": "hi"}
    assert report.mode == "whole" and report.ledger["llm_calls"] == 0
    assert report.nodes["a"].records_in == report.nodes["a"].records_out == 1


def test_fan_in_joins_ports():
    spec = parse_pipeline(
        """pipeline p {
  node l: identity(in="text", out="text");
  node r: identity(in="text", out="text");
  node both: merge(in="record", out="record", ports=["a", "b"]) custom(name="identity");
  l -> both;
  r -> both;
}"""
    )
    out, _ = run(compile_pipeline(spec), {"l": "x", "r": "y"})
    assert out == {"both": {"a": "x", "b": "y"}}


def er_plan(ledger=None, backend=None, output="er_out.csv"):
    spec = parse_pipeline((FIXTURES / "er" / "pipeline.lm").read_text())
    return compile_pipeline(spec, backend=backend or MockBackend.from_file(ER_MOCK), ledger=ledger, params={"output": output})


@pytest.fixture
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(FIXTURES.parent)
    return tmp_path


def test_er_per_record(in_tmp):
    ledger = CostLedger()
    out, report = run(er_plan(ledger, output=str(in_tmp / "labels.csv")), mode="per_record", seed=0)
    table = out["save"]
    assert isinstance(table, Table) and len(table) == 10
    assert [r["match"] for r in table.rows] == [True, True, False, True, False, True, True, True, False, False]
    assert report.ledger["llm_calls"] == ledger.llm_calls == 10
    assert report.nodes["match"].records_in == 10
    assert report.conserved()
    assert report.node_ledger["match"]["llm_calls"] == 10
    assert (in_tmp / "labels.csv").read_text().splitlines()[0] == "match"


def test_er_deterministic(in_tmp):
    a = run(er_plan(output=str(in_tmp / "a.csv")), mode="per_record", backend_kind="MockBackend", seed=3)
    b = run(er_plan(output=str(in_tmp / "a.csv")), mode="per_record", backend_kind="MockBackend", seed=3)
    assert outputs_json(a[0]) == outputs_json(b[0])
    assert a[1].dumps() == b[1].dumps()


def test_auto_mode_streams_llm_pipelines(in_tmp):
    _, report = run(er_plan(output=str(in_tmp / "x.csv")))
    assert report.mode == "per_record"


def test_module_error_carries_node_and_record(in_tmp):
    backend = mock({"tag": "match", "respond": "yes", "once": True}, {"tag": "match", "respond": "maybe"})
    with pytest.raises(ModuleError) as e:
        run(er_plan(backend=backend, output=str(in_tmp / "x.csv")), mode="per_record")
    assert e.value.node == "match" and e.value.index == 1


def test_skip_errors_records_and_continues():
    reg = CustomRegistry()

    def fragile():
        def f(v):
            if v["n"] == 2:
                raise ValueError("bad row")
            return v["n"] * 10

        return f

    reg.register("fragile", fragile)
    reg.register("rows", lambda: (lambda _: Table(Schema.parse("n:int"), tuple({"n": i} for i in range(4)))))
    spec = parse_pipeline(
        """pipeline p {
  node src: rows(in="none", out="table");
  node f: fragile(in="record", out="int");
  node out: identity(in="table", out="table");
  src -> f -> out;
}"""
    )
    out, report = run(compile_pipeline(spec, reg), mode="per_record", skip_errors=True)
    assert [r["f"] for r in out["out"].rows] == [0, 10, None, 30]
    st = report.nodes["f"]
    assert (st.records_in, st.records_out, st.errors) == (4, 3, 1)
    assert "bad row" in st.error_samples[0]
    with pytest.raises(ModuleError):
        run(compile_pipeline(spec, reg), mode="per_record")


def test_output_shape_mismatch():
    reg = CustomRegistry()
    reg.register("liar", lambda: (lambda v: 5))
    plan = compile_pipeline(parse_pipeline('pipeline p { node a: liar(in="text", out="text"); }'), reg)
    with pytest.raises(ShapeMismatch) as e:
        run(plan, {"a": "x"})
    assert e.value.node == "output" or e.value.edge == ("a", "output")


def test_input_shape_mismatch():
    plan = compile_pipeline(parse_pipeline('pipeline p { node a: identity(in="int", out="int"); }'))
    with pytest.raises(ShapeMismatch):
        run(plan, {"a": "x"})


def test_input_errors():
    plan = compile_pipeline(parse_pipeline('pipeline p { node a: identity(in="int", out="int"); }'))
    with pytest.raises(ExecutionError):
        run(plan, {})
    with pytest.raises(ExecutionError):
        run(plan, {"a": 1, "b": 2})
    with pytest.raises(ValueError):
        run(plan, {"a": 1}, mode="batch")
    with pytest.raises(ExecutionError):
        run(plan, {"a": 1}, mode="per_record")


def test_ledger_conservation_with_compile_calls():
    spec = parse_pipeline('pipeline p { node f: f(in="text", out="text") llmgc(task="ask", tools=["llm_ask"]); }')
    backend = mock({"tag": "f:generate", "respond": '```return call("llm_ask", input);```'}, {"tag": "f:tool:llm_ask", "respond": "A"})
    plan = compile_pipeline(spec, backend=backend)
    _, report = run(plan, {"f": "q"})
    assert report.node_ledger["_compile"]["llm_calls"] == 1
    assert report.node_ledger["f"]["llm_calls"] == 1
    assert report.ledger["llm_calls"] == 2 and report.conserved()


def test_simulator_checkpoint_written_at_end(tmp_path):
    ckpt = tmp_path / "sim.json"
    spec = parse_pipeline(
        f'pipeline p {{ node f: f(in="text", out="text") llm(prompt="?") with simulator(window=2, checkpoint="{ckpt}"); }}'
    )
    plan = compile_pipeline(spec, backend=mock({"respond": "A"}))
    run(plan, {"f": "q"})
    assert ckpt.exists()
