"""The ``.afp`` problem format, its canonical printer and the JSON result schema.

A document declares three algebras and two embeddings::

    algebra A {
      summand a1 { kind = ifgf(2); weight = 1/2; }
      summand a2 { kind = matrix(1); weight = 1/2; }
    }
    algebra D {
      summand d1 { kind = matrix(1); weight = 1; }
    }
    embed D into A {
      d1 -> { a1: trace 1/2, a2: mult 1 };
    }

The embedded algebra is D; the first embedding target is A and the second
is B.  Numbers are integers or ``p/q``; ``inf`` is allowed only as an ifgf
parameter.  ``#`` starts a comment.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from enum import Enum

from .extrat import ExtRat
from .model import (
    Diagnostic,
    Inclusion,
    Kind,
    MultiMatrix,
    ProjectionSpec,
    Summand,
    TracialAlgebra,
)

__all__ = [
    "SourceDiagnostic",
    "ParseError",
    "SummandDecl",
    "AlgebraDecl",
    "EmbedEntry",
    "EmbedDecl",
    "ProblemDoc",
    "Problem",
    "parse_problem",
    "print_problem",
    "problem_to_doc",
    "result_to_json",
    "to_jsonable",
]


@dataclass(frozen=True)
class SourceDiagnostic:
    line: int
    col: int
    message: str
    hint: str = ""

    def __str__(self):
        s = f"{self.line}:{self.col}: {self.message}"
        return f"{s} (hint: {self.hint})" if self.hint else s


class ParseError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# document model


@dataclass(frozen=True)
class SummandDecl:
    name: str
    kind: Kind
    param: object  # int size, ExtRat parameter or None
    weight: ExtRat
    span: tuple = field(default=(0, 0), compare=False)

    def to_summand(self) -> Summand:
        return Summand(self.kind, self.param, self.weight)


@dataclass(frozen=True)
class AlgebraDecl:
    name: str
    summands: tuple
    span: tuple = field(default=(0, 0), compare=False)

    def index(self, name: str) -> int | None:
        for i, s in enumerate(self.summands):
            if s.name == name:
                return i
        return None


@dataclass(frozen=True)
class EmbedEntry:
    target: str
    mode: str  # "mult" or "trace"
    value: object  # int for mult, ExtRat for trace
    span: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class EmbedDecl:
    source: str
    target: str
    rows: tuple  # ((d summand name, (EmbedEntry, ...)), ...)
    span: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Problem:
    A: TracialAlgebra
    B: TracialAlgebra
    D: MultiMatrix
    iA: Inclusion
    iB: Inclusion
    names: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class ProblemDoc:
    algebras: tuple  # AlgebraDecl, in document order
    embeds: tuple  # EmbedDecl, in document order

    def algebra(self, name: str) -> AlgebraDecl | None:
        for a in self.algebras:
            if a.name == name:
                return a
        return None

    @property
    def d_name(self) -> str:
        return self.embeds[0].source

    @property
    def roles(self) -> tuple[str, str, str]:
        """Names of (A, B, D)."""
        return self.embeds[0].target, self.embeds[1].target, self.d_name

    def to_problem(self) -> Problem:
        """Build the model objects; reference errors raise ParseError."""
        diags = []
        a_name, b_name, d_name = self.roles
        dec = {n: self.algebra(n) for n in (a_name, b_name, d_name)}
        d_decl = dec[d_name]
        for s in d_decl.summands:
            if s.kind is not Kind.MATRIX:
                diags.append(
                    SourceDiagnostic(*s.span, f"summand {s.name} of {d_name} must be a matrix block", "D is finite dimensional: use kind = matrix(n)")
                )
        if diags:
            raise ParseError(diags)
        D = MultiMatrix(tuple((s.param, s.weight) for s in d_decl.summands))
        algs = {n: TracialAlgebra(tuple(s.to_summand() for s in dec[n].summands)) for n in (a_name, b_name)}
        incls = {}
        for emb in self.embeds:
            tdecl = dec[emb.target]
            table = [[0 if s.kind in (Kind.MATRIX, Kind.INTERVAL) else ExtRat(0) for _ in D.blocks] for s in tdecl.summands]
            for dname, entries in emb.rows:
                j = d_decl.index(dname)
                for e in entries:
                    i = tdecl.index(e.target)
                    if i is None:
                        diags.append(SourceDiagnostic(*e.span, f"unknown summand {e.target} in {emb.target}"))
                        continue
                    s = tdecl.summands[i]
                    type_one = s.kind in (Kind.MATRIX, Kind.INTERVAL)
                    if type_one and e.mode != "mult":
                        diags.append(SourceDiagnostic(*e.span, f"{e.target} is type I; give a multiplicity", f"write {e.target}: mult <int>"))
                        continue
                    if not type_one and e.mode != "trace":
                        diags.append(SourceDiagnostic(*e.span, f"{e.target} is a II_1 factor; give a trace", f"write {e.target}: trace <p/q>"))
                        continue
                    table[i][j] = e.value
            incls[emb.target] = Inclusion(D, algs[emb.target], tuple(tuple(r) for r in table))
        if diags:
            raise ParseError(diags)
        names = {
            "A": [s.name for s in dec[a_name].summands],
            "B": [s.name for s in dec[b_name].summands],
            "D": [s.name for s in d_decl.summands],
        }
        return Problem(algs[a_name], algs[b_name], D, incls[a_name], incls[b_name], names)


# ---------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<decimal>\d+\.\d*|\.\d+)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<punct>[{}();=:,/])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    toks, diags = [], []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            diags.append(SourceDiagnostic(line, col, f"unexpected character {text[pos]!r}"))
            pos += 1
            col += 1
            continue
        kind, val = m.lastgroup, m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind == "decimal":
                diags.append(
                    SourceDiagnostic(line, col, f"rationals must be p/q, got {val}", _decimal_hint(val))
                )
            elif kind not in ("ws", "comment"):
                toks.append(_Tok(kind, val, line, col))
            col += len(val)
        pos = m.end()
    if diags:
        raise ParseError(diags)
    toks.append(_Tok("eof", "", line, col))
    return toks


def _decimal_hint(val: str) -> str:
    try:
        q = Fraction(val)
    except ValueError:
        return "write an exact fraction such as 1/2"
    return f"write {q.numerator}/{q.denominator}" if q.denominator != 1 else f"write {q.numerator}"


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, msg, hint="", tok=None):
        tok = tok or self.cur
        raise ParseError([SourceDiagnostic(tok.line, tok.col, msg, hint)])

    def take(self, kind=None, text=None, hint="") -> _Tok:
        t = self.cur
        if (kind and t.kind != kind) or (text and t.text != text):
            want = repr(text) if text else kind
            got = "end of input" if t.kind == "eof" else repr(t.text)
            self.fail(f"expected {want}, got {got}", hint)
        self.i += 1
        return t

    def at(self, text) -> bool:
        return self.cur.text == text and self.cur.kind in ("id", "punct", "arrow")

    def document(self) -> ProblemDoc:
        algebras, embeds = [], []
        while self.cur.kind != "eof":
            if self.at("algebra"):
                algebras.append(self.algebra())
            elif self.at("embed"):
                embeds.append(self.embed())
            else:
                self.fail(f"expected 'algebra' or 'embed', got {self.cur.text!r}")
        return ProblemDoc(tuple(algebras), tuple(embeds))

    def algebra(self) -> AlgebraDecl:
        kw = self.take("id", "algebra")
        name = self.take("id").text
        self.take(text="{")
        summands = []
        while not self.at("}"):
            summands.append(self.summand())
        self.take(text="}")
        if not summands:
            self.fail(f"algebra {name} has no summands", tok=kw)
        return AlgebraDecl(name, tuple(summands), (kw.line, kw.col))

    def summand(self) -> SummandDecl:
        kw = self.take("id", "summand", hint="each summand is 'summand <id> { kind = ...; weight = ...; }'")
        name = self.take("id").text
        self.take(text="{")
        self.take("id", "kind")
        self.take(text="=")
        kind, param = self.kind()
        self.take(text=";", hint="terminate fields with ';'")
        self.take("id", "weight")
        self.take(text="=")
        weight = self.rational()
        self.take(text=";", hint="terminate fields with ';'")
        self.take(text="}")
        return SummandDecl(name, kind, param, weight, (kw.line, kw.col))

    def kind(self):
        t = self.take("id", hint="kind is matrix(n), interval(n), hyp2 or ifgf(t)")
        if t.text == "hyp2":
            return Kind.HYPII1, None
        if t.text in ("matrix", "interval"):
            self.take(text="(")
            n = self.integer()
            self.take(text=")")
            return Kind(t.text), n
        if t.text == "ifgf":
            self.take(text="(")
            if self.cur.kind == "id" and self.cur.text == "inf":
                self.i += 1
                p = ExtRat.inf()
            else:
                p = self.rational()
            self.take(text=")")
            return Kind.IFGF, p
        self.fail(f"unknown kind {t.text!r}", "kind is matrix(n), interval(n), hyp2 or ifgf(t)", tok=t)

    def integer(self) -> int:
        return int(self.take("int").text)

    def rational(self) -> ExtRat:
        t = self.cur
        if t.kind == "id" and t.text == "inf":
            self.fail("inf is only allowed as an ifgf parameter")
        num = int(self.take("int", hint="numbers are integers or p/q").text)
        if self.at("/"):
            self.i += 1
            den_tok = self.take("int")
            den = int(den_tok.text)
            if den == 0:
                self.fail("zero denominator", tok=den_tok)
            return ExtRat(Fraction(num, den))
        return ExtRat(num)

    def embed(self) -> EmbedDecl:
        kw = self.take("id", "embed")
        src = self.take("id").text
        self.take("id", "into")
        tgt = self.take("id").text
        self.take(text="{")
        rows = []
        while not self.at("}"):
            d = self.take("id").text
            self.take("arrow", hint="rows are '<D summand> -> { ... };'")
            self.take(text="{")
            entries = []
            if not self.at("}"):
                entries.append(self.entry())
                while self.at(","):
                    self.i += 1
                    entries.append(self.entry())
            self.take(text="}")
            self.take(text=";", hint="terminate rows with ';'")
            rows.append((d, tuple(entries)))
        self.take(text="}")
        return EmbedDecl(src, tgt, tuple(rows), (kw.line, kw.col))

    def entry(self) -> EmbedEntry:
        t = self.take("id")
        self.take(text=":")
        mode = self.take("id", hint="use 'mult <int>' or 'trace <p/q>'")
        if mode.text == "mult":
            return EmbedEntry(t.text, "mult", self.integer(), (t.line, t.col))
        if mode.text == "trace":
            return EmbedEntry(t.text, "trace", self.rational(), (t.line, t.col))
        self.fail(f"expected 'mult' or 'trace', got {mode.text!r}", tok=mode)


def _check_structure(doc: ProblemDoc) -> list[SourceDiagnostic]:
    diags = []
    seen = {}
    for a in doc.algebras:
        if a.name in seen:
            diags.append(SourceDiagnostic(*a.span, f"duplicate algebra {a.name}"))
        seen[a.name] = a
        names = set()
        for s in a.summands:
            if s.name in names:
                diags.append(SourceDiagnostic(*s.span, f"duplicate summand {s.name} in {a.name}"))
            names.add(s.name)
    if len(doc.algebras) != 3:
        diags.append(SourceDiagnostic(1, 1, f"expected 3 algebras (A, B, D), found {len(doc.algebras)}"))
    if len(doc.embeds) != 2:
        diags.append(SourceDiagnostic(1, 1, f"expected 2 embed blocks, found {len(doc.embeds)}"))
    if diags:
        return diags
    e1, e2 = doc.embeds
    if e1.source != e2.source:
        diags.append(SourceDiagnostic(*e2.span, f"both embeddings must start from the same algebra ({e1.source} vs {e2.source})"))
    if e1.target == e2.target:
        diags.append(SourceDiagnostic(*e2.span, f"both embeddings target {e1.target}"))
    for e in doc.embeds:
        for n in (e.source, e.target):
            if n not in seen:
                diags.append(SourceDiagnostic(*e.span, f"unknown algebra {n}"))
        if e.target == e.source:
            diags.append(SourceDiagnostic(*e.span, "an algebra cannot embed into itself"))
        if e.source in seen:
            src = seen[e.source]
            rows = set()
            for d, _ in e.rows:
                if src.index(d) is None:
                    diags.append(SourceDiagnostic(*e.span, f"unknown summand {d} of {e.source}"))
                if d in rows:
                    diags.append(SourceDiagnostic(*e.span, f"repeated row {d}"))
                rows.add(d)
    return diags


def parse_problem(text: str) -> ProblemDoc:
    """Parse an ``.afp`` document; syntax and reference errors raise ParseError."""
    doc = _Parser(_lex(text)).document()
    diags = _check_structure(doc)
    if diags:
        raise ParseError(diags)
    return doc


# ---------------------------------------------------------------------------
# printer


def _kind_text(s: SummandDecl) -> str:
    if s.kind is Kind.HYPII1:
        return "hyp2"
    return f"{s.kind.value}({s.param})"


def print_problem(doc: ProblemDoc) -> str:
    """Canonical text: A, B, D blocks then the two embeddings; zero entries omitted."""
    a, b, d = doc.roles
    blocks = []
    for name in (a, b, d):
        alg = doc.algebra(name)
        lines = [f"algebra {name} {{"]
        for s in alg.summands:
            lines.append(f"  summand {s.name} {{ kind = {_kind_text(s)}; weight = {s.weight}; }}")
        lines.append("}")
        blocks.append("\n".join(lines))
    for tgt in (a, b):
        emb = next(e for e in doc.embeds if e.target == tgt)
        lines = [f"embed {emb.source} into {tgt} {{"]
        for dname, entries in emb.rows:
            items = ", ".join(f"{e.target}: {e.mode} {e.value}" for e in entries if e.value != 0)
            lines.append(f"  {dname} -> {{ {items} }};" if items else f"  {dname} -> {{ }};")
        lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def problem_to_doc(A: TracialAlgebra, B: TracialAlgebra, D: MultiMatrix, iA: Inclusion, iB: Inclusion) -> ProblemDoc:
    """Document for model objects, naming summands a1.., b1.., d1.."""

    def decl(name, prefix, summands):
        return AlgebraDecl(
            name, tuple(SummandDecl(f"{prefix}{i + 1}", s.kind, s.param, s.weight) for i, s in enumerate(summands))
        )

    def emb(name, prefix, alg, incl):
        rows = []
        for j in range(len(D)):
            entries = []
            for i, s in enumerate(alg):
                c = incl.coupling[i][j]
                if c != 0:
                    mode = "mult" if s.is_type_one else "trace"
                    entries.append(EmbedEntry(f"{prefix}{i + 1}", mode, c))
            rows.append((f"d{j + 1}", tuple(entries)))
        return EmbedDecl("D", name, tuple(rows))

    d_alg = D.as_algebra()
    return ProblemDoc(
        (decl("A", "a", A), decl("B", "b", B), decl("D", "d", d_alg)),
        (emb("A", "a", A, iA), emb("B", "b", B, iB)),
    )


# ---------------------------------------------------------------------------
# JSON


def _summand_json(s: Summand) -> dict:
    param = None if s.kind is Kind.HYPII1 else str(s.param)
    return {"kind": s.kind.value, "param": param, "weight": str(s.weight)}


def to_jsonable(obj):
    """Exact values become strings; model objects become plain containers."""
    if obj is None or isinstance(obj, bool):
        return obj
    if isinstance(obj, (ExtRat, Fraction, int)):
        return str(obj)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, str):
        return obj
    if isinstance(obj, Summand):
        return _summand_json(obj)
    if isinstance(obj, TracialAlgebra):
        return [_summand_json(s) for s in obj]
    if isinstance(obj, MultiMatrix):
        return [{"size": str(m), "weight": str(g)} for m, g in obj.blocks]
    if isinstance(obj, Inclusion):
        return {
            "source": to_jsonable(obj.source),
            "target": to_jsonable(obj.target),
            "coupling": to_jsonable(obj.coupling),
        }
    if isinstance(obj, ProjectionSpec):
        return to_jsonable(obj.components)
    if isinstance(obj, Diagnostic):
        return {"path": obj.path, "message": obj.message}
    if isinstance(obj, SourceDiagnostic):
        return {"line": obj.line, "col": obj.col, "message": obj.message, "hint": obj.hint}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if hasattr(obj, "__dataclass_fields__"):
        return {k: to_jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def result_to_json(report, certificate: bool = True) -> str:
    """Stable JSON for a ResultReport; key order is fixed."""
    out = {
        "status": report.status.value,
        "summands": to_jsonable(report.output) if report.output is not None else [],
        "fdim": to_jsonable(report.fdim),
        "in_r0": report.in_r0,
        "locators": to_jsonable(report.locators),
    }
    if certificate:
        out["certificate"] = [{"rule": s.rule.value, "data": to_jsonable(s.data)} for s in report.certificate]
    if report.unresolved:
        out["unresolved"] = [{"subproblem": u.subproblem, "reason": u.reason} for u in report.unresolved]
    if report.diagnostics:
        out["diagnostics"] = to_jsonable(report.diagnostics)
    if report.flags:
        out["flags"] = list(report.flags)
    return json.dumps(out, indent=2, ensure_ascii=False) + "\n"
