"""Exact free dimension calculus for amalgamated free products of finite
direct sums of matrix, interval, hyperfinite and interpolated free group
factor algebras over a finite dimensional subalgebra."""

from .extrat import INF, ExtRat, ExtRatError, as_extrat
from .model import *  # noqa: F401,F403
from .model import __all__ as _model_all
from .engine import (
    CertificateStep,
    ResultReport,
    Rule,
    Status,
    amalgamated_free_product,
    free_product_scalars,
    peel_factor_summand,
    prop43_closed_form,
    solve_factor_param,
    strip_tensor,
    thm21_recursion,
)

__version__ = "0.1.0"

__all__ = [
    "INF",
    "ExtRat",
    "ExtRatError",
    "as_extrat",
    "CertificateStep",
    "ResultReport",
    "Rule",
    "Status",
    "amalgamated_free_product",
    "free_product_scalars",
    "peel_factor_summand",
    "prop43_closed_form",
    "solve_factor_param",
    "strip_tensor",
    "thm21_recursion",
    *_model_all,
]
