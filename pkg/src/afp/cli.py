"""Command line front end: ``afp compute|fdim|check|oracle``.

The report goes to stdout, logs and input errors to stderr.  Exit codes:
0 resolved / ok, 2 partial, 1 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction

from .dsl import ParseError, parse_problem, result_to_json, to_jsonable
from .engine import ResultReport, Status, amalgamated_free_product
from .model import fdim, fdim_multimatrix, validate

log = logging.getLogger("afp")

EXIT = {Status.RESOLVED: 0, Status.PARTIAL: 2, Status.ERROR: 1}


def _read(path: str) -> str | None:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        print(f"afp: cannot read {path}: {exc.strerror or exc}", file=sys.stderr)
        return None


def _load(path: str):
    """(problem, None) or (None, ResultReport with status ERROR)."""
    text = _read(path)
    if text is None:
        return None, None
    try:
        problem = parse_problem(text).to_problem()
    except ParseError as exc:
        return None, ResultReport(Status.ERROR, diagnostics=exc.diagnostics)
    return problem, None


def format_text(report: ResultReport, certificate: bool = False) -> str:
    lines = [f"status: {report.status.value}"]
    if report.output is not None:
        lines.append(f"output: {report.output.describe()}")
    if report.fdim is not None:
        lines.append(f"fdim: {report.fdim}")
    if report.in_r0 is not None:
        lines.append(f"in_r0: {str(report.in_r0).lower()}")
    if report.locators:
        lines.append("locators:")
        for name, vec in report.locators.items():
            lines.append(f"  {name}: " + " ".join(str(v) for v in vec))
    for u in report.unresolved:
        lines.append(f"unresolved: {u.subproblem}")
        if u.reason:
            lines.append(f"  reason: {u.reason}")
    for d in report.diagnostics:
        lines.append(f"error: {d}")
    for f in report.flags:
        lines.append(f"flag: {f}")
    if certificate and report.certificate:
        lines.append("certificate:")
        for n, step in enumerate(report.certificate, 1):
            data = to_jsonable(step.data)
            scalars = ", ".join(f"{k}={v}" for k, v in data.items() if isinstance(v, str))
            lines.append(f"  {n}. {step.rule.value}: {scalars}")
    return "\n".join(lines) + "\n"


def cmd_compute(args) -> int:
    problem, err = _load(args.input)
    if problem is None and err is None:
        return 1
    if err is None:
        log.info("computing %s", args.input)
        report = amalgamated_free_product(problem.A, problem.B, problem.D, problem.iA, problem.iB)
    else:
        report = err
    if args.format == "json":
        sys.stdout.write(result_to_json(report, certificate=args.certificate))
    else:
        sys.stdout.write(format_text(report, certificate=args.certificate))
    return EXIT[report.status]


def cmd_fdim(args) -> int:
    problem, err = _load(args.input)
    if problem is None:
        if err is not None:
            for d in err.diagnostics:
                print(f"afp: {d}", file=sys.stderr)
        return 1
    parts = {"A": fdim(problem.A), "B": fdim(problem.B), "D": fdim_multimatrix(problem.D)}
    total = None
    try:
        total = parts["A"].value + parts["B"].value - parts["D"].value
    except ArithmeticError:
        pass
    if args.format == "json":
        out = {
            name: {"value": to_jsonable(v.value), "ledger": [{"rule": tag, **to_jsonable(refs)} for tag, refs in v.ledger]}
            for name, v in parts.items()
        }
        out["predicted"] = to_jsonable(total)
        sys.stdout.write(json.dumps(out, indent=2, ensure_ascii=False) + "\n")
    else:
        for name, v in parts.items():
            sys.stdout.write(f"{name}: {v.value}\n")
            for tag, refs in v.ledger:
                body = ", ".join(f"{k}={to_jsonable(x)}" for k, x in refs.items())
                sys.stdout.write(f"  {tag}: {body}\n")
        sys.stdout.write(f"predicted fdim(A) + fdim(B) - fdim(D): {total}\n")
    return 0


def cmd_check(args) -> int:
    problem, err = _load(args.input)
    if problem is None and err is None:
        return 1
    diags = list(err.diagnostics) if err else []
    if problem is not None:
        for name, obj in (("A", problem.A), ("B", problem.B), ("D", problem.D), ("embed_A", problem.iA), ("embed_B", problem.iB)):
            diags += [type(d)(f"{name}.{d.path}", d.message) for d in validate(obj)]
    if args.format == "json":
        out = {"status": "error" if diags else "ok", "diagnostics": to_jsonable(diags)}
        sys.stdout.write(json.dumps(out, indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write("".join(f"error: {d}\n" for d in diags) if diags else "ok\n")
    return 1 if diags else 0


def cmd_oracle(args) -> int:
    from .oracle import two_free_projections_spectrum

    try:
        a, b = Fraction(args.a), Fraction(args.b)
        log.info("sampling N=%d reps=%d seed=%d", args.dim, args.reps, args.seed)
        est = two_free_projections_spectrum(a, b, N=args.dim, seed=args.seed, reps=args.reps)
    except (ValueError, ZeroDivisionError) as exc:
        print(f"afp: {exc}", file=sys.stderr)
        return 1
    if args.format == "json":
        sys.stdout.write(json.dumps(est.to_dict(), indent=2) + "\n")
    else:
        sys.stdout.write(
            f"a={est.a} b={est.b} N={est.N} seed={est.seed} reps={est.reps}\n"
            f"atom1: {est.atom1:.4f} (predicted {max(a + b - 1, 0)})\n"
            f"atom0: {est.atom0:.4f}\n"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afp", description="Amalgamated free product calculator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    c = sub.add_parser("compute", help="compute A *_D B for an .afp document")
    c.add_argument("input")
    c.add_argument("--certificate", action="store_true", help="include the derivation certificate")
    common(c)
    c.set_defaults(func=cmd_compute)

    f = sub.add_parser("fdim", help="free dimension ledgers of the inputs")
    f.add_argument("input")
    common(f)
    f.set_defaults(func=cmd_fdim)

    k = sub.add_parser("check", help="validate an .afp document")
    k.add_argument("input")
    common(k)
    k.set_defaults(func=cmd_check)

    o = sub.add_parser("oracle", help="Monte Carlo atom estimate for two free projections")
    o.add_argument("a", help="trace of P, e.g. 3/4")
    o.add_argument("b", help="trace of Q, e.g. 3/4")
    o.add_argument("--seed", type=int, default=42)
    o.add_argument("--dim", type=int, default=2000)
    o.add_argument("--reps", type=int, default=3)
    common(o)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
