"""Built-in providers: Euler's constant, pi/4 and ln 2.

Euler's constant uses the binary-digit series

    gamma = 1/2 + sum_{j>=1} nbd(j) / (2j (2j+1) (2j+2))

re-indexed so the leading 1/2 is term 1. Its tail after ``N >= 2`` terms is
below ``(2 + nbd(N-1) + 1/(N-1)) / (16 (N-1)^2)``, a bound that jumps up
right after every power of two from 16 on, so the provider returns its
running minimum.

pi/4 comes from ``arctan(1/2) + arctan(1/3)`` with the two Taylor series
grouped in pairs of terms, and ln 2 from ``ln(3/2) + ln(4/3)`` fed through
the alternating adapter.
"""

from __future__ import annotations

from fractions import Fraction

from .rational import NbdCounter, int_pow, nbd, parse_rational
from .series import AlternatingSeries, SeriesProvider, rational_provider

HALF = Fraction(1, 2)


def gamma_term(j: int) -> Fraction:
    if j < 1:
        raise ValueError(f"terms are indexed from 1, got {j}")
    if j == 1:
        return HALF
    return Fraction(nbd(j - 1), 2 * j * (2 * j - 1) * (2 * j - 2))


def gamma_raw_error(n: int) -> Fraction:
    """Tail bound for ``n >= 2`` terms before the running minimum is taken."""
    if n < 2:
        raise ValueError(f"raw bound defined for N >= 2, got {n}")
    m = n - 1
    return Fraction((2 + nbd(m)) * m + 1, 16 * m ** 3)


def gamma_error(n: int) -> Fraction:
    """Non-increasing tail bound (running minimum of the raw bound)."""
    if n < 0:
        raise ValueError(f"error bound needs N >= 0, got {n}")
    if n == 0:
        return Fraction(1)
    current = HALF
    for i in range(2, n + 1):
        current = min(current, gamma_raw_error(i))
    return current


class GammaProvider(SeriesProvider):
    """Euler's constant.

    Terms share one incremental ``nbd``. The raw bound decreases along each
    run of ``N`` with constant ``nbd(N-1)``; runs end at powers of two, so
    the running minimum at ``N`` is the smaller of the raw bound at ``N`` and
    the best raw bound at a power of two not above ``N``. Those per-power
    minima are cached. ``term_evals`` and ``error_evals`` count calls. Not
    thread-safe: give each worker its own instance.
    """

    name = "gamma"
    monotone = True

    def __init__(self):
        self._nbd = NbdCounter()
        self._run_min = [HALF]  # index t: min(1/2, raw(2), raw(4), ..., raw(2^t))
        self.term_evals = 0
        self.error_evals = 0

    def term(self, j: int) -> Fraction:
        self.term_evals += 1
        if j < 1:
            raise ValueError(f"terms are indexed from 1, got {j}")
        if j == 1:
            return HALF
        return Fraction(self._nbd(j - 1), 2 * j * (2 * j - 1) * (2 * j - 2))

    def term_ratios(self, start: int, count: int) -> list:
        self.term_evals += count
        counter = self._nbd
        out = []
        for j in range(start, start + count):
            if j == 1:
                out.append((1, 2))
            else:
                twice = 2 * j
                out.append((counter(j - 1), twice * (twice - 1) * (twice - 2)))
        return out

    def _raw(self, n: int) -> Fraction:
        m = n - 1
        return Fraction((2 + self._nbd(m)) * m + 1, 16 * m ** 3)

    def _error(self, n: int) -> Fraction:
        self.error_evals += 1
        if n == 1:
            return HALF
        runs = self._run_min
        t = n.bit_length() - 1  # largest t with 2^t <= n
        while len(runs) <= t:
            prev = runs[-1]
            raw = self._raw(1 << len(runs))
            runs.append(raw if raw < prev else prev)
        best = runs[t]
        if n == 1 << t:
            return best
        raw = self._raw(n)
        return raw if raw < best else best


def pi4_term(j: int) -> Fraction:
    if j < 1:
        raise ValueError(f"terms are indexed from 1, got {j}")
    two, three = Fraction(2), Fraction(3)
    head = (int_pow(two, -4 * j + 3) + int_pow(three, -4 * j + 3)) / (4 * j - 3)
    tail = (int_pow(two, -4 * j + 1) + int_pow(three, -4 * j + 1)) / (4 * j - 1)
    return head - tail


def pi4_error(n: int) -> Fraction:
    if n < 0:
        raise ValueError(f"error bound needs N >= 0, got {n}")
    if n == 0:
        return Fraction(1)
    return (int_pow(Fraction(2), -4 * n - 1) + int_pow(Fraction(3), -4 * n - 1)) / (4 * n + 1)


class PiQuarterProvider(SeriesProvider):
    name = "pi4"
    monotone = True

    def term(self, j: int) -> Fraction:
        return pi4_term(j)

    def _error(self, n: int) -> Fraction:
        return pi4_error(n)


class Ln2Provider(AlternatingSeries):
    """ln 2 = ln(1 + 1/2) + ln(1 + 1/3), an alternating series with
    magnitudes ``b_j = (2^-j + 3^-j) / j``."""

    name = "ln2"
    monotone = True

    def __init__(self):
        pass

    def b(self, j: int) -> Fraction:
        return Fraction(3 ** j + 2 ** j, 6 ** j * j)


BUILTIN_NAMES = ("gamma", "pi4", "ln2")


def get_provider(name: str) -> SeriesProvider:
    """Look up a provider by CLI name: gamma, pi4, ln2 or rational:n/d."""
    if name == "gamma":
        return GammaProvider()
    if name == "pi4":
        return PiQuarterProvider()
    if name == "ln2":
        return Ln2Provider()
    if name.startswith("rational:"):
        value = parse_rational(name[len("rational:"):])
        return rational_provider(value.numerator, value.denominator)
    raise KeyError(f"unknown constant {name!r}; expected one of {', '.join(BUILTIN_NAMES)} or rational:n/d")
