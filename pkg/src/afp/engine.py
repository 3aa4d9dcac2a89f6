"""Rewrite engine for amalgamated free products M = A *_D B.

Every public operation returns a :class:`ResultReport` carrying the output
algebra (canonical summand order), the free dimension, per-summand locators
for tracked projections, and a list of :class:`CertificateStep` records that
:func:`replay_step` can re-check from their recorded inputs.

Tracked projections are named ``D[j]`` (a minimal projection of the j-th
block of D), ``A[i]`` and ``B[i]`` (the central projection of the i-th input
summand).  A locator maps each name to its trace in every output summand.

Dispatch order (see :func:`amalgamated_free_product`):

1. one side equals D                      -> the other side
2. one side is a single II_1 factor        -> closed form
3. some side has a II_1 factor summand     -> peel that summand
4. D is the scalars                        -> free product over the scalars
5. type I sides over a larger D            -> strip a tensor factor
6. otherwise                               -> PARTIAL
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

from .extrat import ExtRat, ExtRatError, as_extrat
from .model import (
    ONE,
    ZERO,
    Diagnostic,
    Inclusion,
    Kind,
    MultiMatrix,
    ProjectionSpec,
    Summand,
    TracialAlgebra,
    algebra,
    canonical_order,
    canonicalize,
    central_carrier_complement,
    corner,
    dilate_factor,
    factor,
    fdim,
    fdim_multimatrix,
    interval,
    matrix,
    projection_from_traces,
    restrict_summands,
    restrict_to_corner,
    scalar_inclusion,
    validate,
)

__all__ = [
    "Status",
    "Rule",
    "CertificateStep",
    "Unresolved",
    "ResultReport",
    "OutsideHypotheses",
    "NotApplicable",
    "EngineInvariantError",
    "amalgamated_free_product",
    "prop43_closed_form",
    "thm21_recursion",
    "peel_factor_summand",
    "free_product_scalars",
    "solve_factor_param",
    "strip_tensor",
    "atom_rule",
    "replay_step",
    "verify_certificate",
    "check_locators",
    "tracked_traces",
]

SCALARS = MultiMatrix(((1, ONE),))


class Status(str, Enum):
    RESOLVED = "resolved"
    PARTIAL = "partial"
    ERROR = "error"


class Rule(str, Enum):
    CORNER_A = "CORNER_A"
    PROP43 = "PROP43"
    THM21_B = "THM21_B"
    THM21_C = "THM21_C"
    THM21_D = "THM21_D"
    PEEL_PP = "PEEL_PP"
    STRIP_TENSOR = "STRIP_TENSOR"
    SCALARS_BASE = "SCALARS_BASE"
    TRIVIAL_AD = "TRIVIAL_AD"


class OutsideHypotheses(ValueError):
    """The sub-problem is not covered by the implemented rules."""


class NotApplicable(ValueError):
    """A rewrite rule's pattern is absent from the input."""


class EngineInvariantError(AssertionError):
    """Two computations that must agree exactly did not."""


@dataclass(frozen=True)
class CertificateStep:
    rule: Rule
    data: dict


@dataclass(frozen=True)
class Unresolved:
    subproblem: str
    reason: str


@dataclass
class ResultReport:
    status: Status
    output: TracialAlgebra | None = None
    fdim: ExtRat | None = None
    locators: dict = field(default_factory=dict)
    certificate: list = field(default_factory=list)
    in_r0: bool | None = None
    unresolved: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def resolved(self) -> bool:
        return self.status is Status.RESOLVED


# ---------------------------------------------------------------------------
# helpers


def tracked_traces(A: TracialAlgebra, B: TracialAlgebra, D: MultiMatrix) -> dict:
    """Global trace of every tracked projection."""
    out = {}
    for j, t in enumerate(D.min_traces):
        out[f"D[{j}]"] = t
    for i, s in enumerate(A):
        out[f"A[{i}]"] = s.weight
    for i, s in enumerate(B):
        out[f"B[{i}]"] = s.weight
    return out


def _finish(summands: Sequence[Summand], locs: dict, steps: list, flags=()) -> ResultReport:
    alg = TracialAlgebra(tuple(summands))
    order = canonical_order(alg)
    out = TracialAlgebra(tuple(alg[i] for i in order))
    locators = {k: tuple(v[i] for i in order) for k, v in sorted(locs.items(), key=_id_key)}
    return ResultReport(
        Status.RESOLVED,
        output=out,
        fdim=fdim(out).value,
        locators=locators,
        certificate=list(steps),
        in_r0=out.in_r0,
        flags=sorted(set(flags)),
    )


def _id_key(item):
    name = item[0]
    return (name[0], int(name[2:-1]))


def _describe(A, B, D) -> str:
    return f"({A.describe()}) *_({D.describe()}) ({B.describe()})"


def _partial(A, B, D, reason: str, steps=(), unresolved=None, flags=()) -> ResultReport:
    leaves = list(unresolved) if unresolved else [Unresolved(_describe(A, B, D), reason)]
    total = None
    try:
        total = fdim(A).value + fdim(B).value - fdim_multimatrix(D).value
    except ExtRatError:
        pass
    return ResultReport(
        Status.PARTIAL,
        output=None,
        fdim=total,
        certificate=list(steps),
        in_r0=None,
        unresolved=leaves,
        flags=sorted(set(flags)),
    )


def _relabel(report: ResultReport) -> ResultReport:
    """Swap the A/B names in the locators of a report computed with sides swapped."""
    swap = {"A": "B", "B": "A", "D": "D"}
    locs = {swap[k[0]] + k[1:]: v for k, v in report.locators.items()}
    report.locators = dict(sorted(locs.items(), key=_id_key))
    return report


def _try(f, *args):
    try:
        return f(*args)
    except ExtRatError:
        return None


def _require(cond: bool, what: str):
    if not cond:
        raise EngineInvariantError(what)


def _agree(a, b, what: str):
    if a is not None and b is not None and a != b:
        raise EngineInvariantError(f"{what}: {a} != {b}")


# ---------------------------------------------------------------------------
# top level


def _check_inputs(A, B, D, iA, iB) -> list[Diagnostic]:
    out = []
    for name, obj in (("A", A), ("B", B), ("D", D), ("embed_A", iA), ("embed_B", iB)):
        out += [Diagnostic(f"{name}.{d.path}", d.message) for d in validate(obj)]
    if not out:
        if iA.source != D or iA.target != A:
            out.append(Diagnostic("embed_A", "embedding does not map D into A"))
        if iB.source != D or iB.target != B:
            out.append(Diagnostic("embed_B", "embedding does not map D into B"))
    return out


def amalgamated_free_product(A, B, D, iA, iB) -> ResultReport:
    """Compute M = A *_D B for algebras in the class of finite direct sums of
    matrix, interval, hyperfinite and interpolated free group factor summands."""
    diags = _check_inputs(A, B, D, iA, iB)
    if diags:
        return ResultReport(Status.ERROR, diagnostics=diags)
    return _dispatch(A, B, D, iA, iB)


def _dispatch(A, B, D, iA, iB) -> ResultReport:
    if iA.is_isomorphism():
        return _trivial(A, B, D, iA, iB, "A")
    if iB.is_isomorphism():
        return _trivial(A, B, D, iA, iB, "B")
    if B.is_single_factor:
        return prop43_closed_form(A, B, D, iA, iB)
    if A.is_single_factor:
        return _relabel(prop43_closed_form(B, A, D, iB, iA))
    if A.has_factor_summand or B.has_factor_summand:
        rep = peel_factor_summand(A, B, D, iA, iB)
        if not rep.resolved and D.is_scalars:
            alt = free_product_scalars(A, B)
            if alt.resolved:
                return alt
        return rep
    if D.is_scalars:
        return free_product_scalars(A, B)
    first = None
    for swap in (False, True):
        try:
            if swap:
                rep = _relabel(strip_tensor(B, A, D, iB, iA))
            else:
                rep = strip_tensor(A, B, D, iA, iB)
        except NotApplicable:
            continue
        if rep.resolved:
            return rep
        first = first or rep
    if first is not None:
        return first
    return _partial(A, B, D, "multimatrix amalgamation over a non-scalar D without a tensor factor to strip")


# ---------------------------------------------------------------------------
# A = D


def _trivial(A, B, D, iA, iB, equal_side: str) -> ResultReport:
    if equal_side == "B":
        return _relabel(_trivial(B, A, D, iB, iA, "A"))
    locs = {}
    for j in range(len(D)):
        locs[f"D[{j}]"] = list(iB.block_traces(j))
    for i, row in enumerate(iA.coupling):
        j = next(j for j, c in enumerate(row) if c != 0)
        locs[f"A[{i}]"] = [D.sizes[j] * t for t in iB.block_traces(j)]
    for i, s in enumerate(B):
        locs[f"B[{i}]"] = [s.weight if u == i else ZERO for u in range(len(B))]
    step = CertificateStep(
        Rule.TRIVIAL_AD, {"equal_side": "A", "other": B, "output": canonicalize(B)}
    )
    return _finish(B.summands, locs, [step])


# ---------------------------------------------------------------------------
# closed form


def prop43_closed_form(A, B, D, iA, iB) -> ResultReport:
    """M = A *_D B with B a single II_1 factor: M = L(F_t), t = s + x - fdim(D)."""
    if not B.is_single_factor:
        raise ValueError("B must be a single II_1 factor summand")
    if iA.is_isomorphism():
        raise ValueError("A = D: use the trivial rule")
    s = B[0].factor_param
    x = fdim(A).value
    fd = fdim_multimatrix(D).value
    t = s + x - fd
    _require(t > 1, f"closed form produced t = {t} <= 1")
    step = CertificateStep(
        Rule.PROP43, {"A": A, "B": B, "D": D, "x": x, "s": s, "fdim_D": fd, "t": t}
    )
    return _single_factor_report(t, A, B, D, [step])


def _single_factor_report(t, A, B, D, steps) -> ResultReport:
    locs = {k: [v] for k, v in tracked_traces(A, B, D).items()}
    return _finish([factor(t, 1)], locs, steps)


# ---------------------------------------------------------------------------
# recursive route through corner reduction and induction on dim D


def thm21_recursion(A, B, D, iA, iB) -> ResultReport:
    """Independent route to the closed form: corner reduction to commutative D,
    then induction on dim D cutting by a minimal projection of least trace."""
    if not B.is_single_factor:
        raise ValueError("B must be a single II_1 factor summand")
    if iA.is_isomorphism():
        raise ValueError("A = D: use the trivial rule")
    steps: list = []
    t = _thm21(A, B[0].factor_param, D, iA, steps)
    _require(t > 1, f"recursion produced t = {t} <= 1")
    return _single_factor_report(t, A, B, D, steps)


def _thm21(A: TracialAlgebra, s: ExtRat, D: MultiMatrix, incl: Inclusion, steps: list) -> ExtRat:
    # the factor side is determined up to isomorphism by its parameter s,
    # since trace-preserving embeddings of D into a II_1 factor are conjugate
    if incl.is_isomorphism():
        return s
    if not D.is_commutative:
        q = ProjectionSpec((1,) * len(D))
        sub, scale = restrict_to_corner(incl, q)
        s_q = 1 + scale**-2 * (s - 1)
        t_c = _thm21(sub.target, s_q, sub.source, sub, steps)
        t = 1 + scale**2 * (t_c - 1)
        steps.append(
            CertificateStep(
                Rule.CORNER_A,
                {
                    "inclusion": incl,
                    "q": q,
                    "scale": scale,
                    "qAq": sub.target,
                    "qDq": sub.source,
                    "s": s,
                    "s_q": s_q,
                    "t_corner": t_c,
                    "t": t,
                },
            )
        )
        return t

    if len(D) == 1:
        Bf = algebra(factor(s, 1))
        d_total = fdim(A).value + s
        t, w = solve_factor_param(d_total, [])
        steps.append(
            CertificateStep(
                Rule.SCALARS_BASE,
                {
                    "A": A,
                    "B": Bf,
                    "atoms": (),
                    "d_total": d_total,
                    "factor_weight": w,
                    "t": t,
                    "literature_atom_size": False,
                },
            )
        )
        return t

    mins = D.min_traces
    pj = min(range(len(D)), key=lambda j: (mins[j], j))
    beta = mins[pj]
    others = [j for j in range(len(D)) if j != pj]
    p_tr = incl.block_traces(pj)
    rest_tr = [s_.weight - t for s_, t in zip(A, p_tr)]

    # (b) N1 = (1-p)A(1-p) *_{(1-p)D} (1-p)B(1-p)
    A1, keep = corner(A, rest_tr)
    D1 = MultiMatrix(tuple((1, mins[j] / (1 - beta)) for j in others))
    tr1 = [[incl.trace(i, j) / (1 - beta) for j in others] for i in keep]
    incl1 = Inclusion.from_traces(D1, A1, tr1)
    s1 = 1 + (1 - beta) ** -2 * (s - 1)
    t1 = _thm21(A1, s1, D1, incl1, steps)

    x = fdim(A).value
    fd = fdim_multimatrix(D).value
    sum_ip = sum((A[i].weight ** 2 * (A[i].free_dim - 1) for i in keep), ZERO)
    t1_formula = _t1_formula(beta, s, sum_ip, fd)
    _agree(t1, t1_formula, "t1 recursion vs closed form")
    steps.append(
        CertificateStep(
            Rule.THM21_B,
            {
                "beta": beta,
                "s": s,
                "s1": s1,
                "A1": A1,
                "N1": algebra(factor(t1, 1)),
                "t1": t1,
                "x": x,
                "fdim_D": fd,
                "sum_I_prime": sum_ip,
                "t1_formula": t1_formula,
            },
        )
    )

    # (c) f N2 f = f N1 f * p A~ p
    pspec = projection_from_traces(A, p_tr)
    r = central_carrier_complement(A, pspec)
    gamma = r.trace(A)
    pat = []
    if gamma > 0:
        pat.append(matrix(1, gamma / beta))
    for i, s_ in enumerate(A):
        if p_tr[i] != 0 and pspec.is_full_in(A, i):
            pat.append(s_.with_weight(s_.weight / beta))
    pAtp = TracialAlgebra(tuple(pat))
    fd_pat = fdim(pAtp).value
    t_f = 1 + (beta / (1 - beta)) ** -2 * (t1 - 1)
    t2 = t_f + fd_pat
    t2_formula = _t2_formula(beta, gamma, s, x, fd)
    _agree(t2, t2_formula, "t2 recursion vs closed form")
    t_n2 = 1 + beta**2 * (t2 - 1)
    steps.append(
        CertificateStep(
            Rule.THM21_C,
            {
                "beta": beta,
                "gamma": gamma,
                "t1": t1,
                "t_fN1f": t_f,
                "pAtp": pAtp,
                "fdim_pAtp": fd_pat,
                "t2": t2,
                "s": s,
                "x": x,
                "fdim_D": fd,
                "t2_formula": t2_formula,
                "t_N2": t_n2,
            },
        )
    )
    if gamma == 0:
        return t_n2

    # (d) r M r = r N2 r * L(Z), then dilate by tau(r)
    t_rn2r = 1 + gamma**-2 * (t_n2 - 1)
    t_rmr = t_rn2r + 1
    t = 1 + gamma**2 * (t_rmr - 1)
    steps.append(
        CertificateStep(
            Rule.THM21_D,
            {
                "gamma": gamma,
                "t_N2": t_n2,
                "t_rN2r": t_rn2r,
                "t_rMr": t_rmr,
                "dilation": gamma,
                "t": t,
            },
        )
    )
    return t


def _t1_formula(beta, s, sum_ip, fd):
    c = (1 - beta) ** -2
    return 1 + c * sum_ip + c * (s - 1) - c * (fd - 1 + beta**2)


def _t2_formula(beta, gamma, s, x, fd):
    c = beta**-2
    return 1 - (gamma / beta) ** 2 + c * (s - 1) + c * (x - 1) - c * (fd - 1)


# ---------------------------------------------------------------------------
# free products over the scalars


def _dims_ok(a: int | None, b: int | None) -> bool:
    return (a is None or a >= 2) and (b is None or b >= 3)


def atom_rule(A: TracialAlgebra, B: TracialAlgebra) -> tuple:
    """Finite dimensional summands of A * B.

    A minimal projection of a matrix summand M_n of A (trace a) and one of a
    matrix summand M_m of B (trace b) with a + b > 1 produce a summand
    M_{nm} whose minimal projections have trace a + b - 1.  Returned as
    tuples (i, j, size, weight).
    """
    atoms = []
    for i, sa in enumerate(A):
        if sa.kind is not Kind.MATRIX:
            continue
        for j, sb in enumerate(B):
            if sb.kind is not Kind.MATRIX:
                continue
            excess = sa.min_trace + sb.min_trace - 1
            if excess > 0:
                n = sa.size * sb.size
                atoms.append((i, j, n, n * excess))
    return tuple(atoms)


def solve_factor_param(d_total, atoms) -> tuple[ExtRat, ExtRat]:
    """Parameter and weight of the factor part given the total free dimension.

    ``atoms`` lists (size, weight) of the matrix summands.  Inverts
    d_total = 1 + w^2 (t - 1) + sum weight^2 (fdim(M_size) - 1).
    """
    d_total = as_extrat(d_total)
    w = ONE - sum((as_extrat(a[1]) for a in atoms), ZERO)
    if w <= 0:
        raise ValueError(f"atoms have total weight {1 - w} >= 1")
    rest = sum(
        (as_extrat(wk) ** 2 * (matrix(n).free_dim - 1) for n, wk in atoms), ZERO
    )
    t = 1 + w**-2 * (d_total - 1 - rest)
    if not t > 1:
        raise OutsideHypotheses(f"factor parameter {t} is not > 1")
    return t, w


def free_product_scalars(A: TracialAlgebra, B: TracialAlgebra) -> ResultReport:
    """A * B over the scalars: matrix atoms by the atom rule plus one L(F_t)."""
    if not (_dims_ok(A.dim, B.dim) or _dims_ok(B.dim, A.dim)):
        return _partial(
            A, B, SCALARS, "outside covered hypotheses: need dim A >= 2 and dim B >= 3"
        )
    atoms = atom_rule(A, B)
    d_total = fdim(A).value + fdim(B).value
    try:
        t, w = solve_factor_param(d_total, [(n, wt) for _, _, n, wt in atoms])
    except ValueError as exc:
        return _partial(A, B, SCALARS, f"outside covered hypotheses: {exc}")
    lit = any(A[i].size >= 2 and B[j].size >= 2 for i, j, _, _ in atoms)

    summands = [matrix(n, wt) for _, _, n, wt in atoms] + [factor(t, w)]
    locs = {"D[0]": [s.weight for s in summands]}
    for side, alg, pos in (("A", A, 0), ("B", B, 1)):
        for i, s in enumerate(alg):
            vec = [a[3] if a[pos] == i else ZERO for a in atoms]
            rest = s.weight - sum(vec, ZERO)
            if rest < 0:
                return _partial(A, B, SCALARS, f"outside covered hypotheses: atoms exceed {side}[{i}]")
            locs[f"{side}[{i}]"] = vec + [rest]
    step = CertificateStep(
        Rule.SCALARS_BASE,
        {
            "A": A,
            "B": B,
            "atoms": atoms,
            "d_total": d_total,
            "factor_weight": w,
            "t": t,
            "literature_atom_size": lit,
        },
    )
    flags = ["atom matrix size taken from the literature (n_i, m_j >= 2)"] if lit else []
    return _finish(summands, locs, [step], flags)


# ---------------------------------------------------------------------------
# peeling a factor summand


def peel_factor_summand(A, B, D, iA, iB) -> ResultReport:
    """Split off a II_1 factor summand pA of one side.

    With A~ = pD + (1-p)A and M~ = A~ *_D B, the corner pMp is
    pA *_{pD} pM~p and the central carrier q of p in M~ carries a single
    factor summand of M; the rest of M coincides with (1-q)M~.
    """
    sides = [(lbl, alg) for lbl, alg in (("A", A), ("B", B)) if alg.has_factor_summand]
    if not sides:
        raise NotApplicable("no II_1 factor summand to peel")
    sides.sort(key=lambda item: (-len(item[1]), item[0]))
    first = None
    for lbl, alg in sides:
        i0 = max(
            (i for i, s in enumerate(alg) if s.is_factor),
            key=lambda i: (alg[i].weight, -i),
        )
        if lbl == "A":
            rep = _peel(A, B, D, iA, iB, i0)
        else:
            rep = _relabel(_peel(B, A, D, iB, iA, i0))
        if rep.resolved:
            return rep
        first = first or rep
    return first


def _peel(A, B, D, iA, iB, i0) -> ResultReport:
    alpha = A[i0].weight
    s = A[i0].factor_param
    c = [iA.trace(i0, j) for j in range(len(D))]
    js = [j for j in range(len(D)) if c[j] != 0]

    new = [matrix(D.sizes[j], D.sizes[j] * c[j]) for j in js]
    At = TracialAlgebra(A.summands[:i0] + tuple(new) + A.summands[i0 + 1 :])
    rows = (
        list(iA.coupling[:i0])
        + [tuple(1 if jj == j else 0 for jj in range(len(D))) for j in js]
        + list(iA.coupling[i0 + 1 :])
    )
    iAt = Inclusion(D, At, tuple(rows))
    sub = _dispatch(At, B, D, iAt, iB)
    if not sub.resolved:
        return _partial(A, B, D, "", sub.certificate, sub.unresolved, sub.flags)
    Mt, locs = sub.output, sub.locators

    new_ids = [f"A[{i0 + k}]" for k in range(len(js))]
    p_tr = [sum((locs[n][u] for n in new_ids), ZERO) for u in range(len(Mt))]
    in_q = [t != 0 for t in p_tr]
    beta = sum((Mt[u].weight for u in range(len(Mt)) if in_q[u]), ZERO)

    pD = MultiMatrix(tuple((D.sizes[j], D.sizes[j] * c[j] / alpha) for j in js))
    pMtp, keep = corner(Mt, p_tr)
    traces = [
        [locs[new_ids[k]][u] / (D.sizes[j] * alpha) for k, j in enumerate(js)] for u in keep
    ]
    incl_pMtp = Inclusion.from_traces(pD, pMtp, traces)
    pA = algebra(A[i0].with_weight(1))
    incl_pA = Inclusion(pD, pA, (tuple(c[j] / alpha for j in js),))
    inner = _dispatch(pMtp, pA, pD, incl_pMtp, incl_pA)
    _require(inner.resolved and inner.output.is_single_factor, "corner of a peeled factor is not a factor")
    pMp = inner.output
    lam = alpha / beta
    qM = dilate_factor(pMp, lam)

    rest = [u for u in range(len(Mt)) if not in_q[u]]
    summands = [Mt[u] for u in rest] + [qM[0].with_weight(beta)]

    shift = len(js) - 1
    locs_out = {}
    for name in tracked_traces(A, B, D):
        side, idx = name[0], int(name[2:-1])
        if side == "A" and idx == i0:
            vec = p_tr
        else:
            if side == "A" and idx > i0:
                name_sub = f"A[{idx + shift}]"
            else:
                name_sub = name
            vec = locs[name_sub]
        locs_out[name] = [vec[u] for u in rest] + [
            sum((vec[u] for u in range(len(Mt)) if in_q[u]), ZERO)
        ]

    d_A, d_B = fdim(A).value, fdim(B).value
    fd, fd_pD = fdim_multimatrix(D).value, fdim_multimatrix(pD).value
    d_q = fdim(restrict_summands(Mt, [u for u in range(len(Mt)) if in_q[u]])).value
    d_nq = fdim(restrict_summands(Mt, rest)).value if rest else None
    f = _peel_formulas(alpha, beta, s, d_A, d_B, fd, fd_pD, d_q, d_nq)
    _agree(f["f1"], fdim(Mt).value, "(f1) free dimension of M~")
    _agree(f["f2"], fdim(Mt).value, "(f2) central split of M~")
    _agree(f["f3"], pMp[0].factor_param, "(f3) parameter of pMp")
    _agree(f["f4"], qM[0].factor_param, "(f4) parameter of qM")

    step = CertificateStep(
        Rule.PEEL_PP,
        {
            "alpha": alpha,
            "s": s,
            "pD": pD,
            "At": At,
            "Mt": Mt,
            "p_traces": tuple(p_tr),
            "beta": beta,
            "pMtp": pMtp,
            "pMp": pMp,
            "dilation": lam,
            "qM": qM,
            "output": canonicalize(TracialAlgebra(tuple(summands))),
            "d_A": d_A,
            "d_B": d_B,
            "fdim_D": fd,
            "fdim_pD": fd_pD,
            "d_qMt": d_q,
            "d_1mqMt": d_nq,
            **f,
        },
    )
    steps = sub.certificate + inner.certificate + [step]
    return _finish(summands, locs_out, steps, sub.flags + inner.flags)


def _peel_formulas(alpha, beta, s, d_A, d_B, fd, fd_pD, d_q, d_nq) -> dict:
    f1 = _try(lambda: d_A + alpha**2 * (fd_pD - s) + d_B - fd)
    if d_nq is None:
        f2 = d_q
    else:
        f2 = _try(lambda: 1 + beta**2 * (d_q - 1) + (1 - beta) ** 2 * (d_nq - 1))
    f3 = _try(lambda: s + 1 + (beta / alpha) ** 2 * (d_q - 1) - fd_pD)
    f4 = _try(lambda: (alpha / beta) ** 2 * (s - fd_pD) + d_q)
    return {"f1": f1, "f2": f2, "f3": f3, "f4": f4}


# ---------------------------------------------------------------------------
# stripping a tensor factor


def _find_strip(A: TracialAlgebra, iA: Inclusion):
    groups: dict = {}
    for i, s in enumerate(A):
        if not s.is_type_one:
            continue
        row = iA.coupling[i]
        g = math.gcd(*row)
        groups.setdefault(tuple(k // g for k in row), []).append((i, g))
    for kappa, members in groups.items():
        g = math.gcd(*(gl for _, gl in members))
        idx = [i for i, _ in members]
        if len(idx) >= 2 or any(A[i].kind is Kind.INTERVAL for i in idx):
            return idx, tuple(k * g for k in kappa), [gl // g for _, gl in members]
    return None


def strip_tensor(A, B, D, iA, iB, group: Sequence[int] | None = None) -> ResultReport:
    """Reduce A = C1 + M_k (x) C2 with D inside C1 + M_k.

    For a minimal projection p of M_k, pMp = pM0p * C2 where
    M0 = (C1 + M_k) *_D B; M is reassembled from M0 by dilating pMp over
    the central carrier of p.  ``group`` forces the summands forming
    M_k (x) C2; by default they are detected from the coupling table.
    """
    if group is None:
        found = _find_strip(A, iA)
        if found is None:
            raise NotApplicable("no tensor factor to strip")
        members, kappa, cs = found
    else:
        members = list(group)
        if not members or not all(A[i].is_type_one for i in members):
            raise NotApplicable("strip group must consist of type I summands")
        g = math.gcd(*(x for i in members for x in iA.coupling[i]))
        row0 = iA.coupling[members[0]]
        g0 = math.gcd(*row0) // g
        kappa = tuple(k // g0 for k in row0)
        cs = []
        for i in members:
            row = iA.coupling[i]
            ratio = {Fraction(a, b) for a, b in zip(row, kappa) if b}
            if len(ratio) != 1 or any(a and not b for a, b in zip(row, kappa)):
                raise NotApplicable("coupling rows of the group are not proportional")
            cl = ratio.pop()
            if cl.denominator != 1:
                raise NotApplicable("coupling rows of the group are not proportional")
            cs.append(cl.numerator)
    return _strip(A, B, D, iA, iB, members, kappa, cs)


def _strip(A, B, D, iA, iB, members, kappa, cs) -> ResultReport:
    k = sum(m * kj for m, kj in zip(D.sizes, kappa))
    alpha_g = sum((A[i].weight for i in members), ZERO)
    c2 = TracialAlgebra(
        tuple(
            (interval if A[i].kind is Kind.INTERVAL else matrix)(cl, A[i].weight / alpha_g)
            for i, cl in zip(members, cs)
        )
    )
    trivial = len(c2) == 1 and c2[0].kind is Kind.MATRIX and c2[0].size == 1

    first = members[0]
    others = [i for i in range(len(A)) if i not in members]
    order = sorted(others + [first])
    A0 = TracialAlgebra(
        tuple(matrix(k, alpha_g) if i == first else A[i] for i in order)
    )
    iA0 = Inclusion(D, A0, tuple(kappa if i == first else iA.coupling[i] for i in order))
    pos = {i: n for n, i in enumerate(order)}

    M0rep = _dispatch(A0, B, D, iA0, iB)
    if not M0rep.resolved:
        return _partial(A, B, D, "", M0rep.certificate, M0rep.unresolved, M0rep.flags)
    M0, locs = M0rep.output, M0rep.locators
    z = locs[f"A[{pos[first]}]"]
    tau_p = alpha_g / k
    p_tr = [t / k for t in z]
    in_q = [t != 0 for t in z]
    qidx = [u for u in range(len(M0)) if in_q[u]]
    rest = [u for u in range(len(M0)) if not in_q[u]]
    beta = sum((M0[u].weight for u in qidx), ZERO)

    pM0p, _ = corner(M0, p_tr)
    steps = list(M0rep.certificate)
    flags = list(M0rep.flags)
    lam = tau_p / beta
    if trivial:
        mode, pMp = "identity", pM0p
    elif len(pM0p) == 1 and pM0p[0].kind is Kind.MATRIX and pM0p[0].size == 1:
        # p is minimal in M0, so qM = M_n' (x) C2 with n' = beta / tau(p)
        mode, pMp = "amplify", c2
    else:
        inner = _dispatch(pM0p, c2, SCALARS, scalar_inclusion(pM0p), scalar_inclusion(c2))
        steps += inner.certificate
        flags += inner.flags
        if not inner.resolved:
            return _partial(A, B, D, "", steps, inner.unresolved, flags)
        mode, pMp = "dilate", inner.output
        if len(pMp) != 1:
            return _partial(
                A, B, D, "corner pMp is not a factor; dilation over the central carrier is ambiguous", steps, flags=flags
            )

    if mode == "identity":
        summands = list(M0.summands)
        shares = None
    else:
        qpart = _strip_q_part(mode, pMp, lam)
        if qpart is None:
            return _partial(A, B, D, f"type I corner {pMp[0].descriptor()} does not dilate by {lam}", steps, flags=flags)
        summands = [M0[u] for u in rest] + [s.with_weight(beta * s.weight) for s in qpart]
        shares = [s.weight for s in qpart]

    locs_out = {}
    for name in tracked_traces(A, B, D):
        side, idx = name[0], int(name[2:-1])
        if side == "A" and idx in members:
            if shares is None:
                locs_out[name] = list(z)
            elif mode == "amplify":
                l = members.index(idx)
                locs_out[name] = [ZERO] * len(rest) + [A[idx].weight if n == l else ZERO for n in range(len(shares))]
            else:
                locs_out[name] = [ZERO] * len(rest) + [A[idx].weight]
            continue
        vec = locs[f"A[{pos[idx]}]"] if side == "A" else locs[name]
        if shares is None:
            locs_out[name] = list(vec)
        else:
            under_q = sum((vec[u] for u in qidx), ZERO)
            locs_out[name] = [vec[u] for u in rest] + [under_q * w for w in shares]

    output = canonicalize(TracialAlgebra(tuple(summands)))
    step = CertificateStep(
        Rule.STRIP_TENSOR,
        {
            "k": k,
            "members": tuple(members),
            "A0": A0,
            "C2": c2,
            "M0": M0,
            "p_traces": tuple(p_tr),
            "tau_p": tau_p,
            "beta": beta,
            "pM0p": pM0p,
            "pMp": pMp,
            "dilation": lam,
            "mode": mode,
            "output": output,
        },
    )
    steps.append(step)
    return _finish(summands, locs_out, steps, flags)


def _strip_q_part(mode: str, pMp: TracialAlgebra, lam: ExtRat):
    """Summands of qM with weights relative to tau(q); None if not integral."""
    if mode == "amplify":
        n = 1 / lam
        if not n.is_integer():
            return None
        return [
            (interval if s.kind is Kind.INTERVAL else matrix)(s.size * n.numerator, s.weight)
            for s in pMp
        ]
    s = _dilate_any(pMp[0], lam)
    return None if s is None else [s]

def _dilate_any(s: Summand, lam: ExtRat) -> Summand | None:
    if s.is_factor:
        return dilate_factor(algebra(s.with_weight(1)), lam)[0]
    n = s.size / lam
    if not n.is_integer():
        return None
    return (interval if s.kind is Kind.INTERVAL else matrix)(n.numerator, 1)


# ---------------------------------------------------------------------------
# certificate replay


def replay_step(step: CertificateStep) -> list[str]:
    """Re-execute one step from its recorded inputs; returns mismatches."""
    d = step.data
    bad: list[str] = []

    def check(name, got, want):
        if got != want:
            bad.append(f"{step.rule.value}.{name}: recorded {want}, replayed {got}")

    r = step.rule
    if r is Rule.TRIVIAL_AD:
        check("output", canonicalize(d["other"]), d["output"])
    elif r is Rule.PROP43:
        check("x", fdim(d["A"]).value, d["x"])
        check("s", d["B"][0].factor_param, d["s"])
        check("fdim_D", fdim_multimatrix(d["D"]).value, d["fdim_D"])
        check("t", d["s"] + d["x"] - d["fdim_D"], d["t"])
    elif r is Rule.SCALARS_BASE:
        atoms = atom_rule(d["A"], d["B"])
        check("atoms", atoms, tuple(d["atoms"]))
        check("d_total", fdim(d["A"]).value + fdim(d["B"]).value, d["d_total"])
        t, w = solve_factor_param(d["d_total"], [(n, wt) for _, _, n, wt in atoms])
        check("t", t, d["t"])
        check("factor_weight", w, d["factor_weight"])
    elif r is Rule.CORNER_A:
        sub, scale = restrict_to_corner(d["inclusion"], d["q"])
        check("qAq", sub.target, d["qAq"])
        check("qDq", sub.source, d["qDq"])
        check("scale", scale, d["scale"])
        check("s_q", 1 + scale**-2 * (d["s"] - 1), d["s_q"])
        check("t", 1 + scale**2 * (d["t_corner"] - 1), d["t"])
    elif r is Rule.THM21_B:
        b = d["beta"]
        check("s1", 1 + (1 - b) ** -2 * (d["s"] - 1), d["s1"])
        check("t1_formula", _t1_formula(b, d["s"], d["sum_I_prime"], d["fdim_D"]), d["t1_formula"])
        check("t1", d["t1_formula"], d["t1"])
        check("N1", algebra(factor(d["t1"], 1)), d["N1"])
    elif r is Rule.THM21_C:
        b, g = d["beta"], d["gamma"]
        check("t_fN1f", 1 + (b / (1 - b)) ** -2 * (d["t1"] - 1), d["t_fN1f"])
        check("fdim_pAtp", fdim(d["pAtp"]).value, d["fdim_pAtp"])
        check("t2", d["t_fN1f"] + d["fdim_pAtp"], d["t2"])
        check("t2_formula", _t2_formula(b, g, d["s"], d["x"], d["fdim_D"]), d["t2_formula"])
        check("t2=formula", d["t2"], d["t2_formula"])
        check("t_N2", 1 + b**2 * (d["t2"] - 1), d["t_N2"])
    elif r is Rule.THM21_D:
        g = d["gamma"]
        check("t_rN2r", 1 + g**-2 * (d["t_N2"] - 1), d["t_rN2r"])
        check("t_rMr", d["t_rN2r"] + 1, d["t_rMr"])
        check("dilation", g, d["dilation"])
        check("t", 1 + g**2 * (d["t_rMr"] - 1), d["t"])
    elif r is Rule.PEEL_PP:
        Mt = d["Mt"]
        q = [u for u, t in enumerate(d["p_traces"]) if t != 0]
        rest = [u for u in range(len(Mt)) if u not in q]
        check("pMtp", corner(Mt, d["p_traces"])[0], d["pMtp"])
        check("beta", sum((Mt[u].weight for u in q), ZERO), d["beta"])
        check("dilation", d["alpha"] / d["beta"], d["dilation"])
        check("qM", dilate_factor(d["pMp"], d["dilation"]), d["qM"])
        out = [Mt[u] for u in rest] + [d["qM"][0].with_weight(d["beta"])]
        check("output", canonicalize(TracialAlgebra(tuple(out))), d["output"])
        f = _peel_formulas(
            d["alpha"], d["beta"], d["s"], d["d_A"], d["d_B"], d["fdim_D"], d["fdim_pD"],
            d["d_qMt"], d["d_1mqMt"],
        )
        for key in ("f1", "f2", "f3", "f4"):
            check(key, f[key], d[key])
        check("fdim_pD", fdim_multimatrix(d["pD"]).value, d["fdim_pD"])
    elif r is Rule.STRIP_TENSOR:
        M0 = d["M0"]
        q = [u for u, t in enumerate(d["p_traces"]) if t != 0]
        rest = [u for u in range(len(M0)) if u not in q]
        check("pM0p", corner(M0, d["p_traces"])[0], d["pM0p"])
        check("beta", sum((M0[u].weight for u in q), ZERO), d["beta"])
        check("dilation", d["tau_p"] / d["beta"], d["dilation"])
        if d["mode"] == "identity":
            check("output", canonicalize(M0), d["output"])
        else:
            if d["mode"] == "amplify":
                check("pMp", d["C2"], d["pMp"])
            qpart = _strip_q_part(d["mode"], d["pMp"], d["dilation"])
            out = [M0[u] for u in rest] + [s.with_weight(d["beta"] * s.weight) for s in qpart]
            check("output", canonicalize(TracialAlgebra(tuple(out))), d["output"])
    else:  # pragma: no cover
        bad.append(f"unknown rule {r}")
    return bad


def verify_certificate(report: ResultReport) -> list[str]:
    out = []
    for step in report.certificate:
        out += replay_step(step)
    return out


def check_locators(report: ResultReport, A, B, D) -> list[str]:
    """Conservation and range checks for the locators of a resolved report."""
    bad = []
    if not report.resolved:
        return bad
    weights = report.output.weights
    for name, total in tracked_traces(A, B, D).items():
        vec = report.locators.get(name)
        if vec is None:
            bad.append(f"{name}: missing")
            continue
        if sum(vec, ZERO) != total:
            bad.append(f"{name}: traces sum {sum(vec, ZERO)} != {total}")
        for u, (t, w) in enumerate(zip(vec, weights)):
            if t < 0 or t > w:
                bad.append(f"{name}[{u}]: trace {t} outside [0, {w}]")
    return bad
