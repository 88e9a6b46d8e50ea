from __future__ import annotations

import json
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from curaflow.bench.csvio import CsvError, SchemaMismatch, as_table, load_csv, parse_csv, table_to_csv
from curaflow.bench.metrics import EvalResult, LengthMismatch, eval_er, eval_imputation, eval_ner, prf
from curaflow.bench.report import ER_HEADER, MISSING, emit_report, parse_report
from curaflow.bench.tasks import parse_label, run_er, run_imputation, run_ner
from curaflow.llm import MockBackend
from curaflow.model import Schema, Table

from conftest import FIXTURES


# -- csv --------------------------------------------------------------------------


def test_csv_examples(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text('title,manufacturer,price\n"sony, camera",,1.5\nipod,Apple,\n')
    t = load_csv(p, "title:text,manufacturer:text,price:float")
    assert len(t) == 2
    assert t.rows[0] == {"title": "sony, camera", "manufacturer": None, "price": 1.5}
    assert t.rows[1]["price"] is None
    with pytest.raises(SchemaMismatch):
        load_csv(p, "name:text,manufacturer:text,price:float")


@pytest.mark.parametrize(
    "text, line",
    [("a:int\n1\nx\n", 3), ('a\n"open\n', 2), ("a,b\n1\n", 2), ('a\n"x\ny"\n1,2\n', 4)],
)
def test_csv_errors(text, line):
    head, _, body = text.partition("\n")
    schema = Schema.parse(head) if ":" in head else None
    with pytest.raises(CsvError) as e:
        parse_csv(head.split(":")[0] + "\n" + body if schema else text, schema)
    assert e.value.line == line


cells = st.one_of(st.none(), st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\r\x00"), min_size=1, max_size=8))


@given(st.lists(st.tuples(cells, st.one_of(st.none(), st.integers(-(2**63), 2**63 - 1))), max_size=8))
def test_csv_round_trip(rows):
    t = Table(Schema.parse("a:text,b:int"), tuple({"a": a, "b": b} for a, b in rows))
    assert parse_csv(table_to_csv(t), t.schema) == t


def test_as_table():
    assert as_table([1, 2], "n").schema.columns == (("n", "int"),)
    t = as_table([{"a": 1}, {"b": "x"}])
    assert t.schema.names == ["a", "b"] and t.rows[1] == {"a": None, "b": "x"}
    assert as_table([["x", "y"]], "v").rows[0]["v"] == '["x","y"]'


# -- metrics against hand counts and an independent formula ----------------------


def test_er_examples():
    assert eval_er([True, False, True], [True, False, True]).metrics["f1"] == 1.0
    preds = [True, True, True, False, False]
    gold = [True, True, False, True, False]
    m = eval_er(preds, gold).metrics
    assert m == {"precision": 2 / 3, "recall": 2 / 3, "f1": 2 / 3}
    assert eval_er([False] * 3, [True, False, True]).metrics["f1"] == 0.0
    with pytest.raises(LengthMismatch):
        eval_er([True], [True, False])
    with pytest.raises(ValueError):
        eval_er([], [])


def test_imputation_examples():
    assert eval_imputation(["Sony"], ["SONY"]).metrics["accuracy"] == 1.0
    assert eval_imputation(["a", "b", "c", "x"], ["a", "b", "c", "d"]).metrics["accuracy"] == 0.75
    with pytest.raises(LengthMismatch):
        eval_imputation(["a"], [])


def test_ner_examples():
    m = eval_ner([["Ann"]], [["Ann", "Bo"]]).metrics
    assert (m["precision"], m["recall"]) == (1.0, 0.5) and round(m["f1"], 4) == round(2 / 3, 4)
    assert eval_ner([[], []], [[], []]).metrics == {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    assert eval_ner([[" ann  "]], [["ANN"]]).metrics["f1"] == 1.0


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60))
def test_er_matches_dice_formula(pairs):
    preds, gold = zip(*pairs)
    tp = sum(p and g for p, g in pairs)
    fp = sum(p and not g for p, g in pairs)
    fn = sum(g and not p for p, g in pairs)
    dice = Fraction(2 * tp, 2 * tp + fp + fn) if tp else Fraction(0)
    r = eval_er(list(preds), list(gold))
    assert round(r.metrics["f1"], 4) == round(float(dice), 4)
    assert r.metrics["f1"] == float(dice)
    assert r.counts["tn"] == sum(not p and not g for p, g in pairs)


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40), st.randoms(use_true_random=False))
def test_er_permutation_equivariant(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a = eval_er([p for p, _ in pairs], [g for _, g in pairs])
    b = eval_er([p for p, _ in shuffled], [g for _, g in shuffled])
    assert a.metrics == b.metrics


def test_prf_zero_denominators():
    assert prf(0, 0, 0) == (0, 0, 0)
    assert prf(1, 0, 0) == (1, 1, 1)


def test_eval_result_checks():
    with pytest.raises(ValueError):
        EvalResult("pos", "", 1, {})
    with pytest.raises(ValueError):
        EvalResult("er", "", 1, {"f1": 1.5})


# -- reports --------------------------------------------------------------------


def er_result(name="BeerAdvo-RateBeer", calls=10):
    r = eval_er([True, False, True, True], [True, False, False, True], name)
    r.ledger = {"llm_calls": calls}
    return r


def test_report_layout():
    text = emit_report([er_result()])
    lines = text.strip().splitlines()
    assert lines[0] == "| " + " | ".join(ER_HEADER) + " |"
    assert lines[2] == "| BeerAdvo-RateBeer | 78.8 | 94.37 | 78.6 | 80.00 | 10 | 2.500 |"
    assert len(lines) == 3


def test_report_unknown_dataset_and_empty():
    assert f"| fixture | {MISSING} | {MISSING} | {MISSING} | 80.00 |" in emit_report([er_result("fixture")])
    assert emit_report([]).strip().splitlines() == ["| " + " | ".join(ER_HEADER) + " |", "|" + "|".join(["---"] * 7) + "|"]


def test_report_groups_tasks():
    imp = eval_imputation(["a"], ["a"], "products")
    ner = eval_ner([["Ann"]], [["Ann"]], "docs")
    text = emit_report([er_result(), imp, ner])
    assert text.count("| Dataset |") == 3
    assert "| products | 100.00 | – | – |" in text
    with pytest.raises(ValueError):
        emit_report([], "html")


def test_report_json_round_trip():
    results = [er_result(), eval_ner([["Ann"]], [["Ann", "Bo"]], "docs")]
    text = emit_report(results, "json")
    assert [r.to_json() for r in parse_report(text)] == [r.to_json() for r in results]
    assert json.loads(text)[0]["task"] == "er"


# -- tasks end to end on fixtures ----------------------------------------------------


@pytest.fixture
def at_root(monkeypatch):
    monkeypatch.chdir(FIXTURES.parent)


def test_run_er_fixture(at_root):
    backend = MockBackend.from_file(FIXTURES / "er" / "er_mock.json")
    run = run_er("fixtures/er/pairs.csv", backend, dataset="BeerAdvo-RateBeer")
    assert run.result.metrics["f1"] == 1.0 and run.result.n == 10
    assert run.result.llm_calls == run.report.ledger["llm_calls"] == 10
    assert run.result.dataset == "BeerAdvo-RateBeer"


def test_run_imputation_fixture(at_root):
    mock = FIXTURES / "imputation" / "imputation_mock.json"
    rule = run_imputation("fixtures/imputation/products.csv", "fixtures/imputation/gold.csv", MockBackend.from_file(mock))
    base = run_imputation(
        "fixtures/imputation/products.csv", "fixtures/imputation/gold.csv", MockBackend.from_file(mock), baseline=True
    )
    assert rule.result.metrics["accuracy"] == base.result.metrics["accuracy"] == 1.0
    assert (rule.result.llm_calls, base.result.llm_calls) == (11, 60)
    assert base.result.dataset == "imputation (pure LLM)"


def test_run_ner_fixture(at_root):
    backend = MockBackend.from_file(FIXTURES / "ner" / "ner_mock.json")
    run = run_ner("fixtures/ner/docs.csv", "fixtures/ner/gold.csv", backend)
    m = run.result.metrics
    assert m["precision"] == 1.0 and m["recall"] == 8 / 9
    assert run.result.llm_calls == run.report.ledger["llm_calls"]


def test_memo_simulated_er_keeps_f1(at_root, tmp_path):
    """With a correct teacher the simulator cannot change the labels."""
    from curaflow.compiler import compile_pipeline
    from curaflow.dsl import parse_pipeline
    from curaflow.executor import run

    text = (FIXTURES / "er" / "pipeline.lm").read_text()
    plain = compile_pipeline(parse_pipeline(text), backend=MockBackend.from_file(FIXTURES / "er" / "er_mock.json"), params={"output": str(tmp_path / "a.csv")})
    sim_text = text.replace('parse="bool");', 'parse="bool")\n    with simulator(learner="memo", window=2, threshold=0.5);')
    assert sim_text != text
    sim = compile_pipeline(parse_pipeline(sim_text), backend=MockBackend.from_file(FIXTURES / "er" / "er_mock.json"), params={"output": str(tmp_path / "b.csv")})
    a, _ = run(plain, mode="per_record")
    b, _ = run(sim, mode="per_record")
    gold = [parse_label(r["label"]) for r in load_csv("fixtures/er/pairs.csv").rows]
    fa = eval_er([r["match"] for r in a["save"].rows], gold).metrics["f1"]
    fb = eval_er([r["match"] for r in b["save"].rows], gold).metrics["f1"]
    assert fa == fb == 1.0


def test_parse_label():
    assert parse_label("1") and parse_label(" Yes ") and not parse_label("0")
    with pytest.raises(ValueError):
        parse_label("maybe")


def test_results_record_backend_settings(at_root):
    backend = MockBackend.from_file(FIXTURES / "er" / "er_mock.json")
    result = run_er("fixtures/er/pairs.csv", backend, seed=5).result
    assert result.settings == {"backend": {"kind": "mock"}, "seed": 5}
    assert parse_report(emit_report([result], "json"))[0].settings == result.settings
