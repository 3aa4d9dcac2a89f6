import json
from fractions import Fraction as F
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from afp import algebra, amalgamated_free_product, ifgf, matrix
from afp.dsl import ParseError, parse_problem, print_problem, problem_to_doc, result_to_json
from instances import random_instance

CORPUS = sorted((Path(__file__).parent / "corpus").glob("*.afp"))

MINIMAL = """\
algebra A {
  summand a1 { kind = ifgf(2); weight = 1; }
}

algebra B {
  summand b1 { kind = ifgf(2); weight = 1; }
}

algebra D {
  summand d1 { kind = matrix(1); weight = 1; }
}

embed D into A {
  d1 -> { a1: trace 1 };
}

embed D into B {
  d1 -> { b1: trace 1 };
}
"""


def solve(text):
    p = parse_problem(text).to_problem()
    return amalgamated_free_product(p.A, p.B, p.D, p.iA, p.iB)


def test_minimal_document():
    p = parse_problem(MINIMAL).to_problem()
    assert p.A == algebra(ifgf(2)) == p.B
    assert p.D.blocks == ((1, 1),)
    assert p.names["A"] == ["a1"]


def test_corpus_size():
    assert len(CORPUS) >= 15


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.name)
def test_corpus_roundtrip(path):
    text = path.read_text()
    doc = parse_problem(text)
    assert print_problem(doc) == text
    assert parse_problem(print_problem(doc)) == doc


def test_decimal_rejected_with_position():
    text = MINIMAL.replace("weight = 1; }\n}\n\nalgebra B", "weight = 0.5; }\n}\n\nalgebra B", 1)
    with pytest.raises(ParseError) as exc:
        parse_problem(text)
    d = exc.value.diagnostics[0]
    assert "rationals must be p/q" in d.message
    assert (d.line, d.col) == (2, 41)
    assert d.hint == "write 1/2"


def test_comments_and_free_layout():
    text = "# problem\n" + MINIMAL.replace("\n  summand b1", " summand b1")
    text = text.replace("algebra D {", "algebra D {   # amalgam")
    assert parse_problem(text).to_problem() == parse_problem(MINIMAL).to_problem()


def test_embedding_order_sets_roles():
    blocks = MINIMAL.split("\n\n")
    swapped = "\n\n".join([blocks[2], blocks[1], blocks[0], blocks[3], blocks[4]])
    doc = parse_problem(swapped)
    assert doc.roles == ("A", "B", "D")
    assert print_problem(doc) == MINIMAL


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda t: t.replace("a1: trace 1", "a1: mult 1"), "give a trace"),
        (lambda t: t.replace("a1: trace 1", "zz: trace 1"), "unknown summand zz"),
        (lambda t: t.replace("kind = ifgf(2); weight = 1; }\n}\n\nalgebra B", "kind = ifgf(2); weight = inf; }\n}\n\nalgebra B", 1), "inf is only allowed"),
        (lambda t: t.replace("kind = matrix(1)", "kind = hyp2"), "must be a matrix block"),
        (lambda t: t.replace("kind = ifgf(2)", "kind = free(2)", 1), "unknown kind"),
        (lambda t: t.split("embed D into B")[0], "expected 2 embed blocks"),
        (lambda t: t.replace("summand b1", "summand b1 { kind = hyp2; weight = 1/2; }\n  summand b1", 1), "duplicate summand b1"),
        (lambda t: t.replace("d1 -> { b1: trace 1 };", "d1 -> { b1: trace 1 }"), "expected ';'"),
        (lambda t: t.replace("weight = 1;", "weight = 1/0;", 1), "zero denominator"),
    ],
)
def test_diagnostics(mutate, message):
    with pytest.raises(ParseError) as exc:
        parse_problem(mutate(MINIMAL)).to_problem()
    assert any(message in d.message for d in exc.value.diagnostics)
    assert all(d.line >= 1 and d.col >= 1 for d in exc.value.diagnostics)


def test_semantic_errors_are_deferred():
    # weights that do not sum to 1 parse fine and surface through validation
    p = parse_problem((Path(__file__).parent / "corpus" / "bad.afp").read_text()).to_problem()
    r = amalgamated_free_product(p.A, p.B, p.D, p.iA, p.iB)
    assert r.status.value == "error"


def test_json_resolved_schema():
    out = json.loads(result_to_json(solve((Path(__file__).parent / "corpus" / "ifgf-amalg-c2.afp").read_text())))
    assert list(out) == ["status", "summands", "fdim", "in_r0", "locators", "certificate"]
    assert out["summands"] == [{"kind": "ifgf", "param": "7/2", "weight": "1"}]
    assert out["status"] == "resolved" and out["fdim"] == "7/2" and out["in_r0"] is True
    assert out["certificate"][0]["rule"] == "PROP43"


def test_json_partial_and_error():
    root = Path(__file__).parent / "corpus"
    out = json.loads(result_to_json(solve((root / "m2-amalg-m2.afp").read_text())))
    assert out["status"] == "partial" and out["unresolved"][0]["subproblem"]
    out = json.loads(result_to_json(solve((root / "bad.afp").read_text())))
    assert out["status"] == "error" and out["diagnostics"][0]["path"] == "A.summands"


def test_json_hyperfinite_and_inf():
    out = json.loads(result_to_json(solve((Path(__file__).parent / "corpus" / "inf.afp").read_text())))
    assert out["summands"][0]["param"] == "inf" and out["in_r0"] is False


def test_json_byte_stable():
    text = (Path(__file__).parent / "corpus" / "peel.afp").read_text()
    assert result_to_json(solve(text)) == result_to_json(solve(text))


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_random_documents_roundtrip(rnd):
    A, B, D, iA, iB = random_instance(rnd)
    doc = problem_to_doc(A, B, D, iA, iB)
    text = print_problem(doc)
    again = parse_problem(text)
    assert again == doc and print_problem(again) == text
    p = again.to_problem()
    assert (p.A, p.B, p.D, p.iA, p.iB) == (A, B, D, iA, iB)
