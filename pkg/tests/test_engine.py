import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from afp import (
    INF,
    Inclusion,
    ProjectionSpec,
    Rule,
    Status,
    algebra,
    amalgamated_free_product,
    factor,
    fdim,
    fdim_multimatrix,
    free_product_scalars,
    hyperfinite,
    identity_inclusion,
    ifgf,
    interval,
    matrix,
    multimatrix,
    peel_factor_summand,
    prop43_closed_form,
    scalar_inclusion,
    solve_factor_param,
    strip_tensor,
    thm21_recursion,
)
from afp.engine import (
    EngineInvariantError,
    NotApplicable,
    OutsideHypotheses,
    atom_rule,
    check_locators,
    replay_step,
    verify_certificate,
)
from instances import PARAMS, over_scalars, random_class_s, random_instance, random_multimatrix, random_side

C = multimatrix((1, 1))
C2 = multimatrix((1, F(1, 2)), (1, F(1, 2)))
F2 = algebra(ifgf(2))


def compute(A, B, D=C, iA=None, iB=None):
    iA = iA or scalar_inclusion(A)
    iB = iB or scalar_inclusion(B)
    return amalgamated_free_product(A, B, D, iA, iB)


def half_traces(alg):
    return Inclusion(C2, alg, ((F(1, 2), F(1, 2)),))


def rules(report):
    return [s.rule for s in report.certificate]


def step(report, rule):
    return next(s for s in report.certificate if s.rule is rule)


# -- frozen examples ------------------------------------------------------


def test_free_group_factors():
    r = compute(F2, F2)
    assert r.status is Status.RESOLVED
    assert r.output == algebra(ifgf(4))
    assert r.fdim == 4


def test_hyperfinite_pair():
    r = compute(algebra(hyperfinite()), algebra(hyperfinite()))
    assert r.output == algebra(ifgf(2))


def test_a_equals_d_returns_b():
    A = algebra(matrix(1, F(1, 2)), matrix(1, F(1, 2)))
    iA = Inclusion(C2, A, ((1, 0), (0, 1)))
    B = algebra(matrix(2, F(1, 2)), ifgf(3, F(1, 2)))
    iB = Inclusion(C2, B, ((1, 1), (F(1, 4), F(1, 4))))
    r = compute(A, B, C2, iA, iB)
    assert r.output == B
    assert rules(r) == [Rule.TRIVIAL_AD]
    assert check_locators(r, A, B, C2) == []
    r2 = compute(B, A, C2, iB, iA)
    assert r2.output == B


def test_amalgamated_over_c2():
    r = compute(F2, F2, C2, half_traces(F2), half_traces(F2))
    assert r.output == algebra(ifgf(F(7, 2)))


@pytest.mark.parametrize(
    "A, B, expected",
    [
        (algebra(matrix(2)), F2, algebra(ifgf(F(11, 4)))),
        (algebra(ifgf(2, F(1, 2)), matrix(1, F(1, 2))), F2, algebra(ifgf(3))),
        (algebra(hyperfinite()), algebra(ifgf(F(5, 3))), algebra(ifgf(F(8, 3)))),
    ],
)
def test_prop43_examples(A, B, expected):
    r = prop43_closed_form(A, B, C, scalar_inclusion(A), scalar_inclusion(B))
    assert r.output == expected
    assert replay_step(r.certificate[0]) == []


def test_prop43_guards():
    with pytest.raises(ValueError):
        prop43_closed_form(algebra(matrix(1)), F2, C, scalar_inclusion(algebra(matrix(1))), scalar_inclusion(F2))
    with pytest.raises(ValueError):
        prop43_closed_form(F2, algebra(matrix(2)), C, scalar_inclusion(F2), scalar_inclusion(algebra(matrix(2))))


def test_thm21_chain():
    r = thm21_recursion(F2, F2, C2, half_traces(F2), half_traces(F2))
    assert r.output == algebra(ifgf(F(7, 2)))
    b = step(r, Rule.THM21_B)
    assert b.data["N1"] == algebra(ifgf(10))
    c = step(r, Rule.THM21_C)
    assert c.data["t2"] == 10 and c.data["pAtp"] == algebra(matrix(1))
    assert c.data["gamma"] == F(1, 2) and c.data["beta"] == F(1, 2)
    d = step(r, Rule.THM21_D)
    assert d.data["t_rMr"] == 11 and d.data["dilation"] == F(1, 2) and d.data["t"] == F(7, 2)
    assert verify_certificate(r) == []


def test_thm21_noncommutative_corner():
    M2 = multimatrix((2, 1))
    A = algebra(matrix(4))
    iA = Inclusion(M2, A, ((2,),))
    B = algebra(ifgf(2))
    iB = Inclusion(M2, B, ((F(1, 2),),))
    r1 = prop43_closed_form(A, B, M2, iA, iB)
    r2 = thm21_recursion(A, B, M2, iA, iB)
    assert r1.output == r2.output == algebra(ifgf(F(35, 16)))
    assert rules(r2)[-1] is Rule.CORNER_A
    assert verify_certificate(r2) == []


def test_peel_example():
    A = algebra(ifgf(2, F(1, 2)), matrix(1, F(1, 2)))
    B = algebra(matrix(1, F(1, 2)), ifgf(2, F(1, 2)))
    r = compute(A, B)
    assert r.output == algebra(ifgf(2))
    pp = step(r, Rule.PEEL_PP)
    assert pp.data["Mt"] == algebra(ifgf(F(3, 2)))
    assert pp.data["pMtp"] == algebra(ifgf(3))
    assert pp.data["pMp"] == algebra(ifgf(5))
    assert pp.data["beta"] == 1 and pp.data["dilation"] == F(1, 2)
    assert (pp.data["f1"], pp.data["f3"], pp.data["f4"]) == (F(3, 2), 5, 2)
    assert compute(B, A).output == r.output
    assert verify_certificate(r) == []


def test_peel_direct_call_and_swap():
    A = algebra(matrix(1, F(1, 2)), matrix(1, F(1, 2)))
    B = algebra(hyperfinite(F(1, 3)), matrix(1, F(2, 3)))
    r = peel_factor_summand(*over_scalars(A, B))
    r2 = peel_factor_summand(*over_scalars(B, A))
    assert r.output == r2.output
    assert r.fdim == fdim(A).value + fdim(B).value


def test_peel_not_applicable():
    with pytest.raises(NotApplicable):
        peel_factor_summand(*over_scalars(algebra(matrix(2)), algebra(matrix(3))))


def test_scalars_with_atoms():
    A = algebra(matrix(1, F(9, 10)), matrix(1, F(1, 10)))
    B = algebra(*[matrix(1, F(1, 3))] * 3)
    r = free_product_scalars(A, B)
    assert r.output == algebra(*[matrix(1, F(7, 30))] * 3, ifgf(F(10, 9), F(3, 10)))
    assert r.fdim == F(127, 150)
    assert r.locators["A[0]"] == (F(7, 30),) * 3 + (F(1, 5),)
    assert r.locators["A[1]"] == (0, 0, 0, F(1, 10))


def test_scalars_matrix_atom():
    A = algebra(matrix(2))
    B = algebra(matrix(1, F(9, 10)), matrix(1, F(1, 10)))
    r = compute(A, B)
    assert r.output == algebra(matrix(2, F(4, 5)), ifgf(F(13, 4), F(1, 5)))
    assert r.output[0].min_trace == F(2, 5)
    assert not r.flags  # only n = 2, m = 1


def test_scalars_no_atoms_between_large_blocks():
    # minimal traces of M_n with n >= 2 are at most 1/2, so a + b > 1 needs n = 1 or m = 1
    A = algebra(matrix(2))
    r = compute(A, A)
    assert r.output == algebra(ifgf(F(3, 2)))
    assert not r.flags and step(r, Rule.SCALARS_BASE).data["literature_atom_size"] is False


def test_interval_pair():
    r = compute(algebra(interval(1)), algebra(interval(1)))
    assert r.output == F2


def test_scalars_outside_hypotheses():
    c2 = algebra(matrix(1, F(1, 2)), matrix(1, F(1, 2)))
    r = compute(c2, c2)
    assert r.status is Status.PARTIAL
    assert "outside covered hypotheses" in r.unresolved[0].reason
    assert r.fdim == 1


def test_solve_factor_param_examples():
    assert solve_factor_param(2, []) == (2, 1)
    assert solve_factor_param(F(127, 150), [(1, F(7, 30))] * 3) == (F(10, 9), F(3, 10))
    with pytest.raises(OutsideHypotheses):
        solve_factor_param(1, [])
    with pytest.raises(ValueError):
        solve_factor_param(2, [(1, F(1, 2)), (1, F(1, 2))])


def test_atom_rule_pairs():
    A = algebra(matrix(1, F(9, 10)), matrix(1, F(1, 10)))
    B = algebra(matrix(2, F(1, 2)), interval(1, F(1, 2)))
    # 9/10 + 1/4 > 1 gives a 2 x 2 block of minimal trace 3/20
    assert atom_rule(A, B) == ((0, 0, 2, F(3, 10)),)


def test_strip_example():
    A = algebra(matrix(2, F(1, 2)), matrix(2, F(1, 2)))
    args = over_scalars(A, F2)
    r = strip_tensor(*args)
    assert r.output == algebra(ifgf(F(23, 8)))
    s = step(r, Rule.STRIP_TENSOR)
    assert s.data["M0"] == algebra(ifgf(F(11, 4)))
    assert s.data["pM0p"] == algebra(ifgf(8))
    assert s.data["pMp"] == algebra(ifgf(F(17, 2)))
    assert s.data["dilation"] == F(1, 2)
    direct = prop43_closed_form(*args)
    assert direct.output == r.output
    assert step(direct, Rule.PROP43).data["x"] == F(7, 8)
    assert verify_certificate(r) == []


def test_strip_with_trivial_c2_is_identity():
    A = algebra(matrix(2))
    r = strip_tensor(*over_scalars(A, F2), group=[0])
    assert step(r, Rule.STRIP_TENSOR).data["mode"] == "identity"
    assert r.output == algebra(ifgf(F(11, 4)))


def test_strip_not_applicable():
    with pytest.raises(NotApplicable):
        strip_tensor(*over_scalars(algebra(matrix(2)), F2))


def test_strip_over_c2_interval():
    A = algebra(interval(2))
    iA = Inclusion(C2, A, ((1, 1),))
    B = algebra(matrix(1, F(1, 4)), matrix(1, F(1, 4)), matrix(1, F(1, 2)))
    iB = Inclusion(C2, B, ((1, 0), (1, 0), (0, 1)))
    r = compute(A, B, C2, iA, iB)
    assert r.output == algebra(ifgf(F(9, 8)))
    assert Rule.STRIP_TENSOR in rules(r)
    assert check_locators(r, A, B, C2) == []


def test_m2_amalgamated_m2_is_partial():
    A = algebra(matrix(2))
    iA = Inclusion(C2, A, ((1, 1),))
    r = compute(A, A, C2, iA, iA)
    assert r.status is Status.PARTIAL
    assert r.unresolved and "matrix(2)@1" in r.unresolved[0].subproblem
    assert r.fdim == 1 and r.output is None


def test_error_report():
    A = algebra(matrix(1, F(1, 2)), matrix(1, F(1, 3)))
    r = compute(A, F2)
    assert r.status is Status.ERROR
    assert r.diagnostics[0].path == "A.summands"


def test_infinite_parameter():
    r = compute(algebra(ifgf("inf")), algebra(matrix(2)))
    assert r.output == algebra(ifgf(INF)) and r.in_r0 is False
    r = compute(algebra(ifgf("inf", F(1, 2)), matrix(1, F(1, 2))), algebra(matrix(1, F(1, 2)), hyperfinite(F(1, 2))))
    assert r.resolved and r.fdim == INF


def test_tampered_certificate_is_detected():
    r = compute(F2, F2, C2, half_traces(F2), half_traces(F2))
    s = r.certificate[0]
    bad = type(s)(s.rule, {**s.data, "t": s.data["t"] + 1})
    assert replay_step(bad)


# -- properties -------------------------------------------------------------


def _check_resolved(r, A, B, D):
    assert r.fdim == fdim(A).value + fdim(B).value - fdim_multimatrix(D).value
    assert fdim(r.output).value == r.fdim
    for s in r.output:
        if s.kind.value == "ifgf":
            assert s.param > 1
    if A.in_r0 and B.in_r0:
        assert r.in_r0
    assert check_locators(r, A, B, D) == []
    assert verify_certificate(r) == []


@settings(max_examples=150, deadline=None)
@given(st.randoms(use_true_random=False))
def test_random_instances(rnd):
    A, B, D, iA, iB = random_instance(rnd)
    r = amalgamated_free_product(A, B, D, iA, iB)
    r2 = amalgamated_free_product(B, A, D, iB, iA)
    assert r.status is r2.status
    assert r.output == r2.output
    if r.resolved:
        _check_resolved(r, A, B, D)
    else:
        assert r.status is Status.PARTIAL and r.unresolved


@settings(max_examples=150, deadline=None)
@given(st.randoms(use_true_random=False))
def test_routes_agree_with_factor_side(rnd):
    D = random_multimatrix(rnd)
    A, iA = random_side(rnd, D)
    if iA.is_isomorphism():
        return
    B = algebra(factor(rnd.choice(PARAMS + [1])))
    iB = Inclusion(D, B, (tuple(g / m for m, g in D.blocks),))
    r1 = prop43_closed_form(A, B, D, iA, iB)
    r2 = thm21_recursion(A, B, D, iA, iB)
    r3 = amalgamated_free_product(A, B, D, iA, iB)
    assert r1.output == r2.output == r3.output
    assert r1.output.is_single_factor  # factoriality
    assert verify_certificate(r2) == []


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_associativity_over_scalars(rnd):
    X, Y, Z = (random_class_s(rnd) for _ in range(3))
    xy = compute(X, Y)
    yz = compute(Y, Z)
    if not (xy.resolved and yz.resolved):
        return
    left = compute(xy.output, Z)
    right = compute(X, yz.output)
    if left.resolved and right.resolved:
        assert left.output == right.output


def test_determinism():
    rnd = random.Random(3)
    A, B, D, iA, iB = random_instance(rnd)
    r1 = amalgamated_free_product(A, B, D, iA, iB)
    r2 = amalgamated_free_product(A, B, D, iA, iB)
    assert r1 == r2


def test_invariant_error_type():
    assert issubclass(EngineInvariantError, AssertionError)
