"""
Free products of finite direct sums
===================================

A walk through the basic calculator: build algebras from summands, take
free products over the scalars, then amalgamate over a two dimensional
abelian algebra.
"""

# %%
from fractions import Fraction as F

from afp import (
    Inclusion,
    algebra,
    amalgamated_free_product,
    fdim,
    hyperfinite,
    ifgf,
    matrix,
    multimatrix,
    scalar_inclusion,
)

C = multimatrix((1, 1))


def over_c(A, B):
    return amalgamated_free_product(A, B, C, scalar_inclusion(A), scalar_inclusion(B))


# %% [markdown]
# Two free group factors give a free group factor whose parameter is the sum
# of the free dimensions.  The hyperfinite factor counts as dimension 1.

# %%
F2 = algebra(ifgf(2))
R = algebra(hyperfinite())
print(over_c(F2, F2).output)
print(over_c(R, R).output)

# %% [markdown]
# Finite dimensional pieces may survive.  Here a minimal projection of trace
# 9/10 meets three of trace 1/3, and each pair overlapping by more than the
# whole space leaves an atom of trace 9/10 + 1/3 - 1 = 7/30.

# %%
A = algebra(matrix(1, F(9, 10)), matrix(1, F(1, 10)))
B = algebra(*[matrix(1, F(1, 3))] * 3)
r = over_c(A, B)
print(r.output)
print("fdim", r.fdim, "=", fdim(A).value, "+", fdim(B).value, "- 0")

# %% [markdown]
# Locators say where each summand of an input lands in the output, as the
# trace of its central projection in every output summand.

# %%
for name, vec in r.locators.items():
    print(name, [str(v) for v in vec])

# %% [markdown]
# Amalgamating over C + C with trace 1/2 on each side.

# %%
C2 = multimatrix((1, F(1, 2)), (1, F(1, 2)))
half = Inclusion(C2, F2, ((F(1, 2), F(1, 2)),))
r = amalgamated_free_product(F2, F2, C2, half, half)
print(r.output, "fdim", r.fdim)

# %% [markdown]
# Some shapes are not covered, and the engine says so instead of guessing.

# %%
M2 = algebra(matrix(2))
iM = Inclusion(C2, M2, ((1, 1),))
r = amalgamated_free_product(M2, M2, C2, iM, iM)
print(r.status.value, r.unresolved[0].subproblem, "| predicted fdim", r.fdim)
