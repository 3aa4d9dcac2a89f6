"""
Reading a derivation certificate
================================

Each resolved result carries the chain of rule applications that produced
it.  Every step can be replayed on its own with exact arithmetic.
"""

# %%
from fractions import Fraction as F

from afp import Inclusion, Rule, algebra, ifgf, multimatrix, prop43_closed_form, thm21_recursion
from afp.dsl import to_jsonable
from afp.engine import verify_certificate

C2 = multimatrix((1, F(1, 2)), (1, F(1, 2)))
F2 = algebra(ifgf(2))
half = Inclusion(C2, F2, ((F(1, 2), F(1, 2)),))

# %% [markdown]
# The closed form is a single step.  The recursion cuts down by a minimal
# projection of the amalgam, solves the smaller problem and dilates back.

# %%
closed = prop43_closed_form(F2, F2, C2, half, half)
recursive = thm21_recursion(F2, F2, C2, half, half)
print(closed.output, recursive.output)

# %%
for n, step in enumerate(recursive.certificate, 1):
    data = to_jsonable(step.data)
    print(n, step.rule.value, {k: v for k, v in data.items() if isinstance(v, str)})

# %% [markdown]
# Tampering with a recorded number is caught on replay.

# %%
print("clean:", verify_certificate(recursive))
bad = recursive.certificate[-1]
bad = type(bad)(bad.rule, {**bad.data, "t": bad.data["t"] + 1})
recursive.certificate[-1] = bad
print("tampered:", verify_certificate(recursive))
