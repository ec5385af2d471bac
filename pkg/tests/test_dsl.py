import json

import pytest
from hypothesis import given, settings, strategies as st

from thingmachine import (ModelError, SchemaError, emit_text, from_json, model_stats, parse_model,
                          to_json)
from thingmachine import corpus
from thingmachine.core import Model
from thingmachine.dsl import model_schema, parse_expr, tokenize
from thingmachine.expr import format_expr


def codes(text):
    with pytest.raises(ModelError) as exc:
        parse_model(text)
    return [d.code for d in exc.value.diagnostics], exc.value.diagnostics


def test_minimal_model():
    m = parse_model("machine M { create; }")
    assert len(m.machines) == 1 and len(m.stages) == 1


def test_unresolved_flow_target_span():
    text = "machine M { create; } flow M.create -> X.receive;"
    got, diags = codes(text)
    assert got == ["E-UNRESOLVED"]
    span = diags[0].span
    assert text[span.column - 1:].startswith("X.receive")


@pytest.mark.parametrize("text,code", [
    ("machine M { create; create; }", "E-DUPLICATE"),
    ("machine M { } machine M { }", "E-DUPLICATE"),
    ("machine M { creat; }", "E-SYNTAX"),
    ("machine M { create }", "E-SYNTAX"),
    ("store x: int = true;", "E-TYPE"),
    ("machine M { create; store x: int = 1; } trigger M.create -> M.create when x + true;", "E-TYPE"),
    ("machine M { create; } trigger M.create -> M.create when nope;", "E-UNRESOLVED"),
    ("machine M { process#a; process#b; release; } flow M.process -> M.release;", "E-AMBIGUOUS"),
    ("machine 9M { create; }", "E-SYNTAX"),
    ("machine M { create; } event E1 region { };", "E-SYNTAX"),
])
def test_error_codes(text, code):
    got, _ = codes(text)
    assert code in got


def test_diagnostics_sorted_with_spans():
    text = "machine M { creat; }\nmachine N { relase; }\n"
    _, diags = codes(text)
    assert [d.span.line for d in diags] == [1, 2]


def test_comments_and_whitespace():
    m = parse_model("// header\nmachine M { // trailing\n  create; }\n")
    assert [s.id for s in m.stages] == ["M.create"]


def test_invalid_utf8():
    got, _ = codes(b"machine M { \xff }")
    assert got == ["E-SYNTAX"]


def test_emit_empty_and_kind_order():
    assert emit_text(Model()) == ""
    out = emit_text(parse_model("machine M { release; create; }"))
    assert out.index("create;") < out.index("release;")


def test_emit_preserves_anchor_and_guard():
    src = ("machine M { create; process fn identity; store n: int = 3; }\n"
           "flow M.create -> M.process carries x;\n"
           "trigger M.process -> M.create when (n + 1) mod 4 == 0 && !false;\n"
           'event E1 label "made \\"one\\"" region { M.process, M.create };\n')
    m = parse_model(src)
    assert m.events[0].anchor == "M.create"
    again = parse_model(emit_text(m))
    assert again == m
    assert again.events[0].label == 'made "one"'


def test_json_empty_document():
    assert to_json(Model()) == '{"events":[],"flows":[],"machines":[],"stores":[],"triggers":[]}'


@pytest.mark.parametrize("doc", [
    "{}", "[]", "not json", '{"machines":[],"flows":[],"triggers":[],"stores":[]}',
    '{"machines":[{"id":"M"}],"flows":[],"triggers":[],"stores":[],"events":[]}',
])
def test_json_schema_errors(doc):
    with pytest.raises(SchemaError) as exc:
        from_json(doc)
    assert exc.value.code == "E-SCHEMA"


@pytest.mark.parametrize("name", corpus.NAMES)
def test_json_round_trip_corpus(name):
    m = corpus.load(name).model
    text = to_json(m)
    assert from_json(text) == m
    assert to_json(from_json(text)) == text
    assert list(json.loads(text)) == sorted(json.loads(text))


def test_schema_is_valid_json_schema():
    import jsonschema
    jsonschema.Draft202012Validator.check_schema(model_schema())


def test_expression_precedence_and_mod():
    e = parse_expr("1 + 2 * 3 mod 4 == 3 || false && true")
    assert format_expr(parse_expr(format_expr(e))) == format_expr(e)
    from thingmachine.expr import evaluate
    assert evaluate(parse_expr("(0 - 1) mod 4"), lambda n: 0) == 3
    assert evaluate(e, lambda n: 0) is True


# --- properties ---------------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_parser_total_on_bytes(data):
    try:
        parse_model(data)
    except ModelError as exc:
        assert exc.diagnostics
        for d in exc.diagnostics:
            assert d.span is not None and d.span.line >= 1 and d.span.column >= 1


ALPHABET = list("machine flow trigger store event create process release transfer receive "
                "{ } ; : . # -> when carries region label int bool = 1 true \" M N x // \n")


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(ALPHABET), max_size=60).map(" ".join))
def test_parser_total_on_token_soup(text):
    try:
        parse_model(text)
    except ModelError as exc:
        lines = text.split("\n")
        for d in exc.diagnostics:
            assert d.span is not None
            assert 1 <= d.span.line <= len(lines)
            assert 1 <= d.span.column <= len(lines[d.span.line - 1]) + 1


KINDS = ["create", "process", "release", "transfer", "receive"]


@st.composite
def small_models(draw):
    n = draw(st.integers(1, 3))
    parts, paths = [], []
    for i in range(n):
        kinds = draw(st.lists(st.sampled_from(KINDS), min_size=1, max_size=5, unique=True))
        body = " ".join(f"{k};" for k in kinds)
        if draw(st.booleans()):
            body += f" store s{i}: int = {draw(st.integers(-5, 5))};"
        parts.append(f"machine M{i} {{ {body} }}")
        paths += [f"M{i}.{k}" for k in kinds]
    pairs = draw(st.lists(st.tuples(st.sampled_from(paths), st.sampled_from(paths)), max_size=6,
                          unique=True))
    for a, b in pairs:
        parts.append(f"flow {a} -> {b};")
    for a, b in draw(st.lists(st.tuples(st.sampled_from(paths), st.sampled_from(paths)),
                              max_size=3, unique=True)):
        parts.append(f"trigger {a} -> {b};")
    if draw(st.booleans()):
        region = draw(st.lists(st.sampled_from(paths), min_size=1, max_size=3, unique=True))
        parts.append(f"event E1 region {{ {', '.join(region)} }};")
    return "\n".join(parts)


@settings(max_examples=150, deadline=None)
@given(small_models())
def test_round_trip_property(text):
    m = parse_model(text)
    emitted = emit_text(m)
    m2 = parse_model(emitted)
    assert m2 == m
    assert emit_text(m2) == emitted
    assert model_stats(m2) == model_stats(m)
    assert from_json(to_json(m)) == m


def test_tokenizer_positions():
    toks, diags = tokenize("machine M {\n  create;\n}")
    assert not diags
    create = [t for t in toks if t.text == "create"][0]
    assert (create.line, create.col) == (2, 3)
