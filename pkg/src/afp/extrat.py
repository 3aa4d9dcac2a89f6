"""Exact rationals extended by a single point at +infinity.

Every trace, weight and free group factor parameter in the package is an
:class:`ExtRat`.  Finite values are stored as :class:`fractions.Fraction`
(always in lowest terms with a positive denominator).  The infinite point
absorbs addition and positive scaling; the indeterminate forms ``0 * inf``,
``inf - inf`` and ``inf / inf`` raise :class:`ExtRatError`.

Finite values may be negative: intermediate quantities such as ``d - 1`` for a
free dimension ``d < 1`` need a sign.  Nonnegativity of stored data (weights,
parameters, traces) is enforced by the model types, not here.
"""

from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational

__all__ = ["ExtRat", "ExtRatError", "INF", "as_extrat"]

_RAT_RE = re.compile(r"^\s*(-?\d+)\s*(?:/\s*(\d+))?\s*$")


class ExtRatError(ArithmeticError):
    """Raised for indeterminate or unsupported operations involving infinity."""


class ExtRat:
    __slots__ = ("_q",)

    def __init__(self, value=0, denominator=None):
        if isinstance(value, ExtRat):
            if denominator is not None:
                raise TypeError("denominator not allowed with ExtRat value")
            self._q = value._q
            return
        if isinstance(value, bool) or isinstance(value, float):
            raise TypeError(f"exact value required, got {type(value).__name__}")
        if isinstance(value, str):
            text = value.strip().lower()
            if text in ("inf", "+inf", "infinity"):
                if denominator is not None:
                    raise TypeError("denominator not allowed with inf")
                self._q = None
                return
            m = _RAT_RE.match(text)
            if m is None:
                raise ValueError(f"not an exact rational: {value!r}")
            num, den = int(m.group(1)), int(m.group(2) or 1)
            if den == 0:
                raise ZeroDivisionError(f"zero denominator in {value!r}")
            q = Fraction(num, den)
        elif isinstance(value, Rational):
            q = Fraction(value)
        else:
            raise TypeError(f"cannot build ExtRat from {type(value).__name__}")
        if denominator is not None:
            q = q / Fraction(denominator)
        self._q = q

    @classmethod
    def inf(cls) -> "ExtRat":
        obj = cls.__new__(cls)
        obj._q = None
        return obj

    @property
    def is_inf(self) -> bool:
        return self._q is None

    @property
    def is_finite(self) -> bool:
        return self._q is not None

    @property
    def fraction(self) -> Fraction:
        if self._q is None:
            raise ExtRatError("inf has no finite value")
        return self._q

    @property
    def numerator(self) -> int:
        return self.fraction.numerator

    @property
    def denominator(self) -> int:
        return self.fraction.denominator

    def is_integer(self) -> bool:
        return self._q is not None and self._q.denominator == 1

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        if self._q is None or o._q is None:
            return INF
        return _fin(self._q + o._q)

    __radd__ = __add__

    def __sub__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        if o._q is None:
            raise ExtRatError("subtraction of inf is undefined")
        if self._q is None:
            return INF
        return _fin(self._q - o._q)

    def __rsub__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        return o.__sub__(self)

    def __mul__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        if self._q is None or o._q is None:
            finite = o if self._q is None else self
            if finite._q is not None and finite._q <= 0:
                raise ExtRatError(f"{finite} * inf is undefined")
            return INF
        return _fin(self._q * o._q)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        if o._q is None:
            if self._q is None:
                raise ExtRatError("inf / inf is undefined")
            return _fin(Fraction(0))
        if o._q == 0:
            raise ZeroDivisionError("division by zero")
        if self._q is None:
            if o._q < 0:
                raise ExtRatError("inf / negative is undefined")
            return INF
        return _fin(self._q / o._q)

    def __rtruediv__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        return o.__truediv__(self)

    def __pow__(self, exponent):
        if not isinstance(exponent, int) or isinstance(exponent, bool):
            raise TypeError("only integer exponents are supported")
        if self._q is None:
            if exponent > 0:
                return INF
            if exponent < 0:
                return _fin(Fraction(0))
            return _fin(Fraction(1))
        return _fin(self._q**exponent)

    def __neg__(self):
        if self._q is None:
            raise ExtRatError("-inf is not representable")
        return _fin(-self._q)

    def __pos__(self):
        return self

    def __abs__(self):
        return self if self._q is None else _fin(abs(self._q))

    # -- comparison -------------------------------------------------------

    def _cmp(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return o
        if self._q is None:
            return 0 if o._q is None else 1
        if o._q is None:
            return -1
        return (self._q > o._q) - (self._q < o._q)

    def __eq__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is NotImplemented else c == 0

    def __lt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is NotImplemented else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is NotImplemented else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is NotImplemented else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is NotImplemented else c >= 0

    def __hash__(self):
        return hash(float("inf")) if self._q is None else hash(self._q)

    def __bool__(self):
        return self._q is None or self._q != 0

    def __float__(self):
        return float("inf") if self._q is None else float(self._q)

    def __str__(self):
        return "inf" if self._q is None else str(self._q)

    def __repr__(self):
        return f"ExtRat('{self}')"

    def sort_key(self):
        return (1, Fraction(0)) if self._q is None else (0, self._q)


def _fin(q: Fraction) -> ExtRat:
    obj = ExtRat.__new__(ExtRat)
    obj._q = q
    return obj


def _coerce(x):
    if isinstance(x, ExtRat):
        return x
    if isinstance(x, bool) or isinstance(x, float):
        return NotImplemented
    if isinstance(x, Rational):
        return _fin(Fraction(x))
    return NotImplemented


INF = ExtRat.inf()


def as_extrat(x) -> ExtRat:
    """Convert ints, Fractions, ``"p/q"`` / ``"inf"`` strings to :class:`ExtRat`."""
    return x if isinstance(x, ExtRat) else ExtRat(x)
