"""Series representations of a target probability.

A provider describes ``theta = sum(a_j for j >= 1)`` through two exact
functions: ``term(j)``, the positive rational term, and ``error_bound(N)``, a
rational bound on ``theta`` minus the first ``N`` terms. ``error_bound(0)`` is
always 1.

Providers must honour the bracket ``S_N < theta <= S_N + error_bound(N)``
(``S_N`` the partial sum). Nothing checks this at run time: a bound that is too
small silently produces the wrong output distribution.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Sequence, Union

ONE = Fraction(1)
ZERO = Fraction(0)


class ProviderContractError(ValueError):
    """A provider produced a value that breaks the series contract."""


class SeriesProvider:
    """Base class for series providers.

    Subclasses implement :meth:`term` and :meth:`_error` (``N >= 1``).
    ``negate_output`` asks the sampler to flip its final bit, which turns a
    provider for ``1 - theta`` into a ``theta``-coin. ``degenerate`` marks
    finite series whose error bound reaches 0. ``monotone`` declares that
    ``error_bound`` is already non-increasing and cheap to evaluate at any
    ``N``; such providers skip the envelope wrapper.
    """

    name = "series"
    negate_output = False
    degenerate = False
    monotone = False

    def term(self, j: int) -> Fraction:
        raise NotImplementedError

    def _error(self, n: int) -> Fraction:
        raise NotImplementedError

    def error_bound(self, n: int) -> Fraction:
        if n < 0:
            raise ValueError(f"error_bound needs N >= 0, got {n}")
        if n == 0:
            return ONE
        return self._error(n)

    def term_ratios(self, start: int, count: int) -> list:
        """Terms ``start .. start+count-1`` as ``(numerator, denominator)``
        pairs, not necessarily reduced. Override when that is cheaper."""
        out = []
        for j in range(start, start + count):
            a = self.term(j)
            out.append((a.numerator, a.denominator))
        return out

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class MonotoneEnvelope(SeriesProvider):
    """Replace ``error_bound`` by its running minimum over ``1..N``.

    The running minimum is kept for the last ``N`` queried, so the sequential
    queries the sampler makes cost one comparison each. A query below the
    last ``N`` restarts the scan from 1.
    """

    def __init__(self, inner: SeriesProvider):
        self.inner = inner
        self.name = inner.name
        self.negate_output = inner.negate_output
        self.degenerate = inner.degenerate
        self._n = 0
        self._min = ONE

    def term(self, j: int) -> Fraction:
        return self.inner.term(j)

    def _error(self, n: int) -> Fraction:
        if n < self._n:
            self._n, self._min = 0, ONE
        i, current = self._n, self._min
        while i < n:
            i += 1
            e = self.inner.error_bound(i)
            if i == 1 or e < current:
                current = e
        self._n, self._min = i, current
        return current


def monotone_envelope(p: SeriesProvider) -> SeriesProvider:
    """Wrap ``p`` so its error bound is non-increasing. Idempotent."""
    if isinstance(p, MonotoneEnvelope) or p.monotone:
        return p
    return MonotoneEnvelope(p)


class AlternatingSeries(SeriesProvider):
    """Positive-term form of ``b_1 - b_2 + b_3 - ...``.

    Consecutive pairs are grouped, ``a_j = b_(2j-1) - b_(2j)``, and the tail
    after ``N`` pairs is bounded by ``b_(2N+1)`` (Leibniz). ``b`` must
    decrease strictly to 0; this is checked lazily, per term.
    """

    name = "alternating"

    def __init__(self, b: Union[Callable[[int], Fraction], Sequence[Fraction], None] = None):
        if b is not None:
            self._b = b

    def b(self, j: int) -> Fraction:
        source = self._b
        if callable(source):
            return Fraction(source(j))
        if j > len(source):
            raise ProviderContractError(f"alternating sequence has no element b_{j}")
        return Fraction(source[j - 1])

    def term(self, j: int) -> Fraction:
        if j < 1:
            raise ValueError(f"terms are indexed from 1, got {j}")
        a = self.b(2 * j - 1) - self.b(2 * j)
        if a <= 0:
            raise ProviderContractError(f"non-positive grouped term a_{j} = {a}; b is not strictly decreasing")
        return a

    def _error(self, n: int) -> Fraction:
        e = self.b(2 * n + 1)
        if e < 0:
            raise ProviderContractError(f"negative b_{2 * n + 1} = {e}")
        return e


def alternating_adapter(b: Union[Callable[[int], Fraction], Sequence[Fraction]]) -> AlternatingSeries:
    """Provider for an alternating series given by its magnitudes ``b_j`` (1-indexed)."""
    return AlternatingSeries(b)


class RationalSeries(SeriesProvider):
    """One-term series for an exactly known ``theta = n/d``."""

    degenerate = True
    monotone = True

    def __init__(self, n: int, d: int):
        if d == 0:
            raise ZeroDivisionError("zero denominator")
        value = Fraction(n, d)
        if not 0 < value < 1:
            raise ValueError(f"rational target must lie in (0, 1), got {n}/{d}")
        self.value = value
        self.name = f"rational:{value.numerator}/{value.denominator}"

    def term(self, j: int) -> Fraction:
        return self.value if j == 1 else ZERO

    def _error(self, n: int) -> Fraction:
        return ZERO


def rational_provider(n: int, d: int) -> RationalSeries:
    return RationalSeries(n, d)


class Complemented(SeriesProvider):
    """Same series, with the sampler output flipped."""

    def __init__(self, inner: SeriesProvider):
        self.inner = inner
        self.name = f"1-({inner.name})"
        self.negate_output = not inner.negate_output
        self.degenerate = inner.degenerate
        self.monotone = inner.monotone

    def term(self, j: int) -> Fraction:
        return self.inner.term(j)

    def error_bound(self, n: int) -> Fraction:
        return self.inner.error_bound(n)


def complemented(p: SeriesProvider) -> Complemented:
    """Provider whose coin is ``1 - theta`` where ``p`` sums to ``theta``."""
    return Complemented(p)


def partial_sum(p: SeriesProvider, n: int) -> Fraction:
    """Exact sum of the first ``n`` terms."""
    total = ZERO
    for j in range(1, n + 1):
        total += p.term(j)
    return total
