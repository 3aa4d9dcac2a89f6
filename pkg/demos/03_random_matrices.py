"""
Checking an atom with random matrices
=====================================

Two free projections of traces a and b meet in a projection of trace
max(a + b - 1, 0).  Randomly rotated projections in large matrix algebras
are asymptotically free, so the multiplicity of eigenvalue 1 of PQP should
approach that number.
"""

# %%
from fractions import Fraction as F

import numpy as np

from afp import algebra, amalgamated_free_product, matrix, multimatrix, scalar_inclusion
from afp.oracle import two_free_projections_spectrum

# %% [markdown]
# The exact answer from the engine: C + C with weights (a, 1 - a) against
# C + C with weights (b, 1 - b).

# %%
a, b = F(9, 10), F(1, 3)
A = algebra(matrix(1, a), matrix(1, 1 - a))
B = algebra(matrix(1, b), matrix(1, 1 - b))
C = multimatrix((1, 1))
exact = amalgamated_free_product(A, B, C, scalar_inclusion(A), scalar_inclusion(B))
print(exact.output)

# %%
est = two_free_projections_spectrum(a, b, N=2000, seed=42, reps=3)
print(f"atom at 1: {est.atom1:.4f}  predicted {float(a + b - 1):.4f}")
print(f"atom at 0: {est.atom0:.4f}")

# %% [markdown]
# The continuous part of the spectrum on the range of P, as a coarse text
# histogram.

# %%
h = np.asarray(est.histogram)
for k, v in enumerate(h):
    print(f"{k / len(h):.2f} {'#' * int(round(200 * v))}")
