"""Exact rational arithmetic helpers.

Every number on the sampling path is a :class:`fractions.Fraction`. Fractions
are immutable, always stored in lowest terms with a positive denominator, and
backed by Python's arbitrary-precision integers, so no extra wrapper type is
needed here. The functions below give the handful of operations the rest of
the package relies on a stable name, and add the binary-digit count ``nbd``.
"""

from __future__ import annotations

import operator
from fractions import Fraction
from typing import Literal, Optional, Tuple, Union

Rational = Fraction

_OPS = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "div": operator.truediv,
}


def make_rational(n: int, d: int = 1) -> Fraction:
    """Return ``n/d`` in canonical form. Raises ZeroDivisionError if ``d == 0``."""
    if d == 0:
        raise ZeroDivisionError(f"zero denominator in {n}/{d}")
    return Fraction(n, d)


def arith(a: Fraction, b: Fraction, op: Literal["add", "sub", "mul", "div"]) -> Fraction:
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown operation {op!r}") from None
    return fn(Fraction(a), Fraction(b))


def int_pow(base: Fraction, e: int) -> Fraction:
    """Exact ``base**e`` for an integer exponent; ``0**-e`` raises ZeroDivisionError."""
    base = Fraction(base)
    if e < 0 and base == 0:
        raise ZeroDivisionError("zero raised to a negative power")
    return base ** int(e)


def compare(a: Fraction, b: Fraction) -> int:
    """Three-way exact comparison: -1, 0 or 1."""
    return (a > b) - (a < b)


def nbd(t: int, start: Optional[Tuple[int, int]] = None) -> int:
    """Number of binary digits of ``t``: the smallest ``b`` with ``2**b > t``.

    Computed by trying ``b = 1, 2, ...`` in turn. ``start`` is a previously
    computed pair ``(t0, nbd(t0))`` with ``t0 <= t``; the search then resumes
    from ``nbd(t0)`` instead of 1.
    """
    if t < 1:
        raise ValueError(f"nbd needs a positive integer, got {t}")
    b = 1
    if start is not None:
        t0, b0 = start
        if t0 <= t:
            b = b0
    power = 1 << b
    while power <= t:
        power <<= 1
        b += 1
    return b


class NbdCounter:
    """Incremental ``nbd`` that remembers the largest argument seen.

    Queries at or above the remembered argument continue the doubling loop
    from where it stopped, so a run of increasing queries costs as much as a
    single query on the largest argument. Smaller queries fall back to a
    fresh loop. ``steps`` counts doubling steps, for instrumentation.
    """

    def __init__(self):
        self._t = 1
        self._b = 1
        self._power = 2
        self.steps = 0

    def __call__(self, t: int) -> int:
        if t < 1:
            raise ValueError(f"nbd needs a positive integer, got {t}")
        if t < self._t:
            return nbd(t)
        power, b = self._power, self._b
        while power <= t:
            power <<= 1
            b += 1
            self.steps += 1
        self._t, self._b, self._power = t, b, power
        return b


def parse_rational(text: str) -> Fraction:
    """Parse ``"n/d"`` or a bare integer."""
    text = text.strip()
    num, sep, den = text.partition("/")
    try:
        if sep:
            return make_rational(int(num), int(den))
        return make_rational(int(num))
    except ValueError:
        raise ValueError(f"not a rational literal: {text!r}") from None


def format_rational(x: Union[Fraction, int]) -> str:
    """Render as ``"num/den"`` (the denominator is always shown)."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"
