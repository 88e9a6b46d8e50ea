from __future__ import annotations

import json

import pytest

from curaflow.cli import CliConfig, CliError, main, parse_bindings

from conftest import FIXTURES

ER_MOCK = "mock:fixtures/er/er_mock.json"
IMP_MOCK = "mock:fixtures/imputation/imputation_mock.json"


@pytest.fixture(autouse=True)
def at_root(monkeypatch):
    monkeypatch.chdir(FIXTURES.parent)


def cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_er(capsys, tmp_path):
    report = tmp_path / "report.json"
    code, out, err = cli(
        capsys, "run", "fixtures/er/pipeline.lm", "--backend", ER_MOCK, "--seed", "1",
        "--data", f"output={tmp_path / 'labels.csv'}", "--report", str(report),
    )
    assert code == 0, err
    assert "10 llm call(s)" in err
    outputs = json.loads(out)
    assert "save" in outputs
    rep = json.loads(report.read_text())
    assert rep["ledger"]["llm_calls"] == 10 and rep["seed"] == 1
    assert (tmp_path / "labels.csv").exists()


def test_run_twice_is_byte_identical(capsys, tmp_path):
    def once(tag):
        out = tmp_path / f"out{tag}.json"
        rep = tmp_path / f"rep{tag}.json"
        args = ["run", "fixtures/er/pipeline.lm", "--backend", ER_MOCK, "--seed", "7"]
        args += ["--data", f"output={tmp_path / 'labels.csv'}", "--output", str(out), "--report", str(rep)]
        assert cli(capsys, *args)[0] == 0
        return out.read_bytes(), rep.read_bytes(), (tmp_path / "labels.csv").read_bytes()

    assert once("a") == once("b")


def test_missing_pipeline(capsys):
    code, _, err = cli(capsys, "run", "nowhere.lm", "--backend", ER_MOCK)
    assert code == 1 and "nowhere.lm" in err


def test_parse_error_has_location(capsys, tmp_path):
    bad = tmp_path / "bad.lm"
    bad.write_text("pipeline p {\n  node a: identity(x=);\n}\n")
    code, _, err = cli(capsys, "compile", str(bad))
    assert code == 1 and f"{bad}:2:" in err


def test_graph_diagnostics_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.lm"
    bad.write_text('pipeline p { node a: identity(out="int"); node b: identity(in="text"); a -> b; }')
    code, _, err = cli(capsys, "compile", str(bad))
    assert code == 1 and "shape_mismatch" in err


def test_mock_exhausted_exit_2(capsys, tmp_path):
    script = tmp_path / "m.json"
    script.write_text(json.dumps({"rules": [{"tag": "match", "respond": "yes", "once": True}]}))
    code, _, err = cli(capsys, "run", "fixtures/er/pipeline.lm", "--backend", f"mock:{script}", "--data", f"output={tmp_path / 'o.csv'}")
    assert code == 2 and "'match'" in err


def test_no_backend(capsys):
    code, _, err = cli(capsys, "run", "fixtures/er/pipeline.lm")
    assert code == 1 and "backend" in err


def test_bad_flags_exit_1(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run"])
    assert e.value.code == 1


def test_compile_explain_imputation(capsys):
    code, out, err = cli(capsys, "compile", "fixtures/imputation/pipeline.lm", "--backend", IMP_MOCK, "--explain")
    assert code == 0, err
    assert "ScriptImpl" in out and "llm_impute=llm" in out
    assert out.index("load") < out.index("impute") < out.index("save")


def test_compile_without_backend_fails_for_llm_nodes(capsys):
    code, _, err = cli(capsys, "compile", "fixtures/er/pipeline.lm")
    assert code == 1 and "match" in err


def test_validate(capsys):
    code, out, _ = cli(capsys, "validate", "fixtures/imputation/pipeline.lm", "--backend", IMP_MOCK)
    assert code == 0 and "impute" in out and "passed" in out
    code, out, _ = cli(capsys, "validate", "fixtures/imputation/pipeline.lm", "--backend", IMP_MOCK, "--json")
    assert json.loads(out)["impute"]["status"] == "passed"


def test_validate_failure_exit_1(capsys, tmp_path):
    script = tmp_path / "m.json"
    script.write_text(json.dumps({"rules": [{"respond": "```return \"?\";```"}]}))
    code, out, _ = cli(capsys, "validate", "fixtures/imputation/pipeline.lm", "--backend", f"mock:{script}")
    assert code == 1 and "failed" in out


def test_templates(capsys):
    code, out, _ = cli(capsys, "templates", "list")
    assert code == 0
    assert [line.split()[0] for line in out.strip().splitlines()] == ["data_imputation", "entity_resolution", "name_extraction"]
    code, out, _ = cli(capsys, "templates", "show", "entity_resolution")
    assert code == 0 and "pipeline entity_resolution" in out
    assert cli(capsys, "templates", "show", "nope")[0] == 1
    assert cli(capsys, "templates", "show")[0] == 1


def test_bench_er(capsys, tmp_path):
    rep = tmp_path / "r.json"
    code, out, _ = cli(
        capsys, "bench", "er", "--pairs", "fixtures/er/pairs.csv", "--backend", ER_MOCK,
        "--dataset", "BeerAdvo-RateBeer", "--report", str(rep),
    )
    assert code == 0
    assert "| BeerAdvo-RateBeer | 78.8 | 94.37 | 78.6 | 100.00 | 10 | 1.000 |" in out
    assert json.loads(rep.read_text())[0]["ledger"]["llm_calls"] == 10


def test_bench_imputation_with_baseline(capsys):
    code, out, _ = cli(
        capsys, "bench", "imputation", "--data", "fixtures/imputation/products.csv",
        "--gold", "fixtures/imputation/gold.csv", "--backend", IMP_MOCK, "--baseline",
    )
    assert code == 0
    assert "| imputation | 100.00 | 11 | 0.183 |" in out
    assert "| imputation (pure LLM) | 100.00 | 60 | 1.000 |" in out


def test_bench_ner_json(capsys):
    code, out, _ = cli(
        capsys, "bench", "ner", "--docs", "fixtures/ner/docs.csv", "--gold", "fixtures/ner/gold.csv",
        "--backend", "mock:fixtures/ner/ner_mock.json", "--format", "json",
    )
    assert code == 0 and json.loads(out)[0]["task"] == "ner"


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "curation.toml"
    cfg.write_text(f'backend = "{ER_MOCK}"\nseed = 4\n[limits]\nmax_steps = 500\n')
    loaded = CliConfig.load(cfg)
    assert loaded.seed == 4 and loaded.make_limits().max_steps == 500
    code, _, err = cli(capsys, "--config", str(cfg), "run", "fixtures/er/pipeline.lm", "--data", f"output={tmp_path / 'o.csv'}")
    assert code == 0, err
    cfg.write_text("colour = 1\n")
    assert cli(capsys, "--config", str(cfg), "templates", "list")[0] == 1
    with pytest.raises(CliError):
        CliConfig.load(cfg)


def test_parse_bindings():
    assert parse_bindings(["a=1", "b=x", "c=[1, 2]", 'd="q"']) == {"a": 1, "b": "x", "c": [1, 2], "d": "q"}
    with pytest.raises(CliError):
        parse_bindings(["novalue"])
