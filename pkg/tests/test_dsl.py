from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curaflow.compiler.templates import BUILTIN_DIR
from curaflow.dsl import (
    Binding,
    Decoration,
    Edge,
    NodeSpec,
    ParamRef,
    ParseError,
    PipelineSpec,
    parse_pipeline,
    pretty_print,
    validate_graph,
)

from conftest import FIXTURES

ER = '''
pipeline er {
  node load: load_csv(path="pairs.csv", in="none", out="table");
  node match: resolve(in="record", out="bool") llm(prompt="Same entity?", parse="bool");
  node save: save_csv(path="out.csv", in="table", out="table");
  load -> match -> save;
}
'''

NER = '''
# tokenize, noun phrases, tag
pipeline names {
  node load: load_csv(path="docs.csv", in="none", out="table");
  node tokenize: tokenize(in="record", out="list<text>") llmgc(task="split into words");
  node phrases: noun_phrases(in="list<text>", out="list<text>") llmgc(task="group capitalised tokens");
  node tag: tag(in="list<text>", out="list<text>") llm(prompt="""people?
one per line""", parse="list")
    with validator(cases="[]", rounds=2)
    with simulator(learner="memo", window=10, threshold=0.9);
  node save: save_json(path="names.json", in="table", out="table");
  load -> tokenize -> phrases -> tag -> save;
}
'''

MORE = [
    'pipeline one { node only: identity(); }',
    'pipeline p { param k = 3; param f = 0.5; param b = true; param s = "x\\ty"; node a: identity(v=${k}, w=[1, 2.5, "z", ${s}]); }',
    '''pipeline join {
  node left: identity(out="text");
  node right: identity(out="text");
  node both: merge(ports=["a", "b"]) custom(name="identity");
  left -> both;
  right -> both;
}''',
    '''pipeline fan {
  node src: identity(out="int");
  node x: identity(in="int", out="int");
  node y: identity(in="int", out="int");
  src -> x;
  src -> y;
}''',
    '''pipeline guarded {
  node q: lookup(in="record", out="text") llm(prompt="Answer: {{context}}")
    with connector(policy="policy.json", table="t.csv", query="by_name", max_cells=20);
}''',
]


def all_sources() -> list[str]:
    texts = [ER, NER, *MORE]
    texts += [p.read_text(encoding="utf-8") for p in sorted(BUILTIN_DIR.glob("*.lm"))]
    texts += [p.read_text(encoding="utf-8") for p in sorted(FIXTURES.glob("*/*.lm"))]
    return texts


def test_corpus_size():
    assert len(all_sources()) >= 10


@pytest.mark.parametrize("source", all_sources())
def test_round_trip(source):
    spec = parse_pipeline(source)
    printed = pretty_print(spec)
    assert parse_pipeline(printed) == spec
    assert pretty_print(parse_pipeline(printed)) == printed


def test_er_structure():
    spec = parse_pipeline(ER)
    assert spec.node_ids() == ["load", "match", "save"]
    assert [(e.src, e.dst) for e in spec.edges] == [("load", "match"), ("match", "save")]
    assert spec.node("match").binding == Binding("llm", {"prompt": "Same entity?", "parse": "bool"})
    assert validate_graph(spec) == []


def test_decorations_in_order():
    spec = parse_pipeline(NER)
    assert [d.kind for d in spec.node("tag").decorations] == ["validator", "simulator"]
    assert spec.node("tag").binding.args["prompt"] == "people?\none per line"


def test_empty_source():
    with pytest.raises(ParseError) as e:
        parse_pipeline("")
    assert (e.value.line, e.value.col) == (1, 1)
    assert "pipeline" in e.value.message


def test_duplicate_node_reported_at_second():
    src = 'pipeline p {\n  node a: identity();\n  node a: identity();\n}'
    with pytest.raises(ParseError) as e:
        parse_pipeline(src)
    assert (e.value.line, e.value.col) == (3, 8)


@pytest.mark.parametrize(
    "src",
    [
        "pipeline p { node a: identity() }",
        "pipeline p { node a: identity(); a -> b; }",
        "pipeline p { node a: identity() bogus(); }",
        "pipeline p { node a: identity() with validator() with validator(); }",
        'pipeline p { node a: identity(in="shape"); }',
        "pipeline p { param x = ${y}; }",
        "pipeline p { node a: identity(x=1, x=2); }",
        'pipeline p { node a: identity(s="unterminated); }',
        "pipeline p { } extra",
        "pipeline p { node a: identity(); node b: identity(); a -> b; a -> b; }",
    ],
)
def test_parse_errors(src):
    with pytest.raises(ParseError):
        parse_pipeline(src)


def test_parse_error_location():
    with pytest.raises(ParseError) as e:
        parse_pipeline("pipeline p {\n  node a: identity(x=);\n}")
    assert (e.value.line, e.value.col) == (2, 22)


def diag_kinds(spec):
    return sorted(d.kind for d in validate_graph(spec))


def test_cycle_diagnostic():
    spec = PipelineSpec("c", nodes=[NodeSpec("a", "identity"), NodeSpec("b", "identity")], edges=[Edge("a", "b"), Edge("b", "a")])
    diags = validate_graph(spec)
    assert [d.kind for d in diags] == ["cycle"]
    assert diags[0].nodes == ("a", "b")


def test_unbound_input():
    nodes = [NodeSpec("a", "identity"), NodeSpec("m", "merge", {"ports": ["x", "y"]})]
    spec = PipelineSpec("p", nodes=nodes, edges=[Edge("a", "m", "out", "x")])
    assert diag_kinds(spec) == ["unbound_input"]
    with pytest.raises(ParseError, match="unconnected"):
        parse_pipeline('pipeline p { node a: identity(); node m: merge(ports=["x", "y"]); a -> m; }')


def test_shape_mismatch_and_unreachable():
    spec = parse_pipeline(
        'pipeline p { node a: identity(out="text"); node b: identity(in="table"); node c: identity(); a -> b; }'
    )
    assert diag_kinds(spec) == ["shape_mismatch", "unreachable"]


def test_dangling_edge():
    spec = PipelineSpec("d", nodes=[NodeSpec("a", "identity")], edges=[Edge("a", "zz")])
    assert diag_kinds(spec) == ["dangling_edge"]


def test_streamed_shapes_check():
    spec = parse_pipeline(ER)
    assert validate_graph(spec) == []
    bad = parse_pipeline(ER.replace('in="record", out="bool"', 'in="text", out="bool"'))
    assert diag_kinds(bad) == ["shape_mismatch"]


# -- generated specs ---------------------------------------------------------

names = st.sampled_from(["identity", "resolve", "tokenize", "tag", "merge", "custom_op"])
texts = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=12)
literals = st.one_of(
    texts,
    st.integers(min_value=0, max_value=10**12),
    st.floats(min_value=0, max_value=1e20, allow_nan=False, allow_infinity=False),
    st.booleans(),
    st.sampled_from([ParamRef("data"), ParamRef("k")]),
)
arg_values = st.one_of(literals, st.lists(literals, max_size=3))
arg_names = st.sampled_from(["path", "prompt", "task", "rounds", "x", "y", "window"])
args = st.dictionaries(arg_names, arg_values, max_size=3)


@st.composite
def specs(draw):
    n = draw(st.integers(min_value=1, max_value=6))
    ids = [f"n{i}" for i in range(n)]
    edges = []
    for j in range(1, n):
        preds = draw(st.lists(st.integers(min_value=0, max_value=j - 1), max_size=2, unique=True))
        edges += [(ids[i], ids[j]) for i in preds]
    edges = draw(st.permutations(edges))
    indeg = {i: sum(1 for _, d in edges if d == i) for i in ids}
    nodes = []
    for i in ids:
        a = draw(args)
        if indeg[i] > 1:
            a["ports"] = [f"p{k}" for k in range(indeg[i])]
        binding = draw(st.one_of(st.none(), st.builds(Binding, st.sampled_from(["custom", "llm", "llmgc"]), args)))
        kinds = draw(st.lists(st.sampled_from(["validator", "simulator", "connector"]), unique=True, max_size=3))
        decos = [Decoration(k, draw(args)) for k in kinds]
        nodes.append(NodeSpec(i, draw(names), a, binding, decos))
    used: dict[str, int] = {}
    spec_edges = []
    for s, d in edges:
        node = nodes[ids.index(d)]
        port = node.ports[used.get(d, 0)]
        used[d] = used.get(d, 0) + 1
        spec_edges.append(Edge(s, d, "out", port))
    params = draw(st.dictionaries(st.sampled_from(["data", "k", "out"]), literals.filter(lambda v: not isinstance(v, ParamRef))))
    return PipelineSpec(draw(st.sampled_from(["p", "gen", "pipe_1"])), params, nodes, spec_edges)


@settings(max_examples=200, deadline=None)
@given(specs())
def test_generated_round_trip(spec):
    printed = pretty_print(spec)
    assert parse_pipeline(printed) == spec
    assert pretty_print(parse_pipeline(printed)) == printed
