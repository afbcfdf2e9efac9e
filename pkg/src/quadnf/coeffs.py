"""Exact coefficient field: rationals and Gaussian rationals.

Rationals are ``gmpy2.mpq`` values, which are always stored in lowest
terms with a positive denominator.  ``GaussRat`` pairs two of them.
"""

from __future__ import annotations

from fractions import Fraction

from gmpy2 import mpq

ZERO_Q = mpq(0)
ONE_Q = mpq(1)


class CoefficientError(ValueError):
    """Raised when a rational literal cannot be parsed."""


def rat(x) -> mpq:
    """Coerce ints, Fractions, mpq values and ``"p/q"`` strings to mpq."""
    if isinstance(x, str):
        return parse_rat(x)
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, float):
        raise TypeError("floating point coefficients are not accepted")
    return mpq(x)


def parse_rat(text: str) -> mpq:
    s = text.strip()
    if not s:
        raise CoefficientError("empty rational literal")
    num, sep, den = s.partition("/")
    try:
        p = int(num)
        q = int(den) if sep else 1
    except ValueError:
        raise CoefficientError(f"malformed rational literal {text!r}") from None
    if q == 0:
        raise CoefficientError(f"zero denominator in {text!r}")
    return mpq(p, q)


def format_rat(x: mpq) -> str:
    return f"{x.numerator}/{x.denominator}"


class GaussRat:
    """Gaussian rational ``re + i*im`` with exact parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if type(re) is mpq else rat(re)
        self.im = im if type(im) is mpq else rat(im)

    @classmethod
    def coerce(cls, x) -> "GaussRat":
        if isinstance(x, GaussRat):
            return x
        if isinstance(x, complex):
            raise TypeError("floating point coefficients are not accepted")
        return cls(x, 0)

    @classmethod
    def parse(cls, re: str, im: str) -> "GaussRat":
        return cls(parse_rat(re), parse_rat(im))

    def __add__(self, other):
        o = GaussRat.coerce(other)
        return GaussRat(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = GaussRat.coerce(other)
        return GaussRat(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return GaussRat.coerce(other) - self

    def __mul__(self, other):
        o = GaussRat.coerce(other)
        a, b, c, d = self.re, self.im, o.re, o.im
        return GaussRat(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = GaussRat.coerce(other)
        n = o.re * o.re + o.im * o.im
        if not n:
            raise ZeroDivisionError("division by zero Gaussian rational")
        a, b, c, d = self.re, self.im, o.re, o.im
        return GaussRat((a * c + b * d) / n, (b * c - a * d) / n)

    def __rtruediv__(self, other):
        return GaussRat.coerce(other) / self

    def __neg__(self):
        return GaussRat(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, k: int):
        if k < 0:
            return (ONE / self) ** (-k)
        out, base = ONE, self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conj(self) -> "GaussRat":
        return GaussRat(self.re, -self.im)

    def abs2(self) -> mpq:
        return self.re * self.re + self.im * self.im

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        if isinstance(other, GaussRat):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)) or type(other) is mpq:
            return not self.im and self.re == other
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self):
        return f"GaussRat({format_rat(self.re)}, {format_rat(self.im)})"

    def __str__(self):
        if not self.im:
            return format_rat(self.re) if self.re.denominator != 1 else str(self.re.numerator)
        return f"({format_rat(self.re)} + {format_rat(self.im)}*I)"

    def __complex__(self):
        return complex(float(self.re), float(self.im))


ZERO = GaussRat(0, 0)
ONE = GaussRat(1, 0)
I = GaussRat(0, 1)
