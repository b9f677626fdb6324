"""Bernoulli(theta) sampling from fair bits with exact rational decisions.

The sampler keeps a quantized interval of width ``2**-k`` known to contain
``theta``. Each iteration adds series terms until the bracket
``(S, S + eps]`` (partial sum, error bound) pins ``theta`` inside the lower,
middle or upper half of the previous interval, records that choice ``s`` and
then spends one fair bit to decide whether to keep refining. The sequence of
``(N_k, s_k)`` pairs depends only on the provider, never on the bits.

Exactness
---------
Every decision is an exact comparison between rationals. The partial sum is
tracked as an integer enclosure ``[lo, hi] * 2**-prec``: each term is added
rounded down to ``lo`` and rounded up to ``hi``. When ``lo == hi`` the
enclosure is the exact value. Otherwise the exact value lies strictly
inside. All thresholds are dyadic with denominator ``2**(k+1)``, exactly
representable at scale ``prec``, so most comparisons resolve on integers.
Those that don't fall back to exact fractions. This keeps providers with
fast-growing denominators (Euler's constant needs about a million terms at
depth 40) usable without giving up exactness.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

from .coins import BitSource, SourceExhausted
from .rational import nbd
from .series import SeriesProvider, monotone_envelope, partial_sum

MAX_ITERATIONS = 4096
DEFAULT_MAX_TERMS = 10**6
# exact partial sums are dropped once their denominator exceeds this many bits
EXACT_BITS = 4096
_GUARD_BITS = 64
# monotone providers switch to block skipping once this many terms are in
GALLOP_AFTER = 2048
_CHUNK_START = 256
_CHUNK_MAX = 1 << 16


class ProviderDivergence(RuntimeError):
    """More series terms were needed than the max-terms cap allows."""


class IterationCapExceeded(RuntimeError):
    """A sample ran past ``MAX_ITERATIONS``; the bit source is not fair."""


def default_max_terms() -> int:
    value = os.environ.get("BUFFON_MAX_TERMS")
    return int(value) if value else DEFAULT_MAX_TERMS


@dataclass(frozen=True)
class SamplerState:
    """Snapshot at the end of iteration ``k``.

    ``ell`` is the quantized lower bound the iteration started from (the
    lower end of the previous interval) and ``s`` the choice it made, so the
    current interval is ``(lower, lower + 2**-k]`` with
    ``lower = ell + s * 2**-(k+1)``. ``eps_hat`` is the error bound for
    ``n_terms`` terms. The partial sum itself is held as the fixed-point
    enclosure ``[sum_lo, sum_hi] * 2**-prec`` plus, while it stays small,
    its exact value.
    """

    k: int = 0
    n_terms: int = 0
    ell: Fraction = Fraction(0)
    s: int = 0
    eps_hat: Fraction = Fraction(1)
    prec: int = 128
    sum_lo: int = 0
    sum_hi: int = 0
    exact_sum: Optional[Fraction] = field(default=Fraction(0), repr=False)

    @property
    def ell_hat(self) -> Optional[Fraction]:
        """Exact partial sum, or None once it has outgrown ``EXACT_BITS``
        (use :func:`buffon.series.partial_sum` to recompute it)."""
        return self.exact_sum

    @property
    def lower(self) -> Fraction:
        return self.ell + self.s * Fraction(1, 2 ** (self.k + 1))

    @property
    def interval(self) -> Tuple[Fraction, Fraction]:
        """Current quantized interval, open below and closed above."""
        lo = self.lower
        return lo, lo + Fraction(1, 2 ** self.k)


INITIAL_STATE = SamplerState()


@dataclass(frozen=True)
class Trace:
    """Telemetry of one sample: output, iterations, inputs, terms, schedule."""

    y: int
    m: int
    l: int
    n_m: int
    schedule: Tuple[Tuple[int, int], ...] = ()

    def to_dict(self) -> dict:
        return {"y": self.y, "m": self.m, "l": self.l, "n_m": self.n_m,
                "schedule": [list(p) for p in self.schedule]}


def _scaled(x: Fraction, prec: int) -> Tuple[int, int]:
    """floor and ceil of ``x * 2**prec``."""
    q, r = divmod(x.numerator << prec, x.denominator)
    return q, q + (r != 0)


def _dyadic_scaled(x: Fraction, prec: int) -> int:
    return x.numerator << (prec - (x.denominator.bit_length() - 1))


def _gt(lo: int, hi: int, t: int) -> Optional[bool]:
    """Is the enclosed value > t?  None when undecided."""
    if lo == hi:
        return lo > t
    if lo >= t:
        return True
    if hi <= t:
        return False
    return None


def _le(lo: int, hi: int, t: int) -> Optional[bool]:
    """Is the enclosed value <= t?  None when undecided."""
    if lo == hi:
        return lo <= t
    if hi <= t:
        return True
    if lo >= t:
        return False
    return None


def advance_iteration(state: SamplerState, provider: SeriesProvider,
                      max_terms: Optional[int] = None) -> SamplerState:
    """Run iteration ``state.k + 1``. Deterministic; consumes no bits.

    ``provider`` must already have a non-increasing error bound (wrap it in
    :func:`monotone_envelope`). Providers flagged ``monotone`` may also be
    asked for terms a little past the point where the iteration stops. Raises :class:`ProviderDivergence` if more
    than ``max_terms`` terms would be needed.
    """
    if max_terms is None:
        max_terms = default_max_terms()
    k = state.k + 1
    ell = state.ell + state.s * Fraction(1, 2 ** k)
    n = state.n_terms
    eps = state.eps_hat
    exact = state.exact_sum
    lo, hi, prec = state.sum_lo, state.sum_hi, state.prec
    if prec < k + 1 + _GUARD_BITS:
        new_prec = prec
        while new_prec < k + 1 + _GUARD_BITS:
            new_prec *= 2
        lo <<= new_prec - prec
        hi <<= new_prec - prec
        prec = new_prec

    base = _dyadic_scaled(ell, prec)
    unit = 1 << (prec - k)
    thresholds = (base + unit,                 # ell + 2^-k
                  base + (unit >> 1),          # ell + (1/2) 2^-k
                  base + unit + (unit >> 1))   # ell + (3/2) 2^-k
    elo, ehi = _scaled(eps, prec)
    gallop = getattr(provider, "monotone", False)
    chunk = _CHUNK_START

    s = _decide(provider, n, exact, eps, ell, k, lo, hi, elo, ehi, thresholds)
    while s < 0:
        if n >= max_terms:
            raise ProviderDivergence(
                f"{provider.name}: iteration {k} needs more than {max_terms} series terms")
        if not gallop or n < GALLOP_AFTER:
            n += 1
            a = provider.term(n)
            qa, ra = divmod(a.numerator << prec, a.denominator)
            lo += qa
            hi += qa + (ra != 0)
            if exact is not None:
                exact += a
                if exact.denominator.bit_length() > EXACT_BITS:
                    exact = None
            eps = provider.error_bound(n)
            elo, ehi = _scaled(eps, prec)
            s = _decide(provider, n, exact, eps, ell, k, lo, hi, elo, ehi, thresholds)
            continue

        count = min(chunk, max_terms - n)
        chunk = min(2 * chunk, _CHUNK_MAX)
        ratios = provider.term_ratios(n + 1, count)
        cum_lo, cum_hi = [lo], [hi]
        for num, den in ratios:
            qa, ra = divmod(num << prec, den)
            lo += qa
            hi += qa + (ra != 0)
            cum_lo.append(lo)
            cum_hi.append(hi)
        step, s, eps = _scan(provider, n, prec, cum_lo, cum_hi, thresholds, ell, k)
        if exact is not None:
            exact += sum((Fraction(num, den) for num, den in ratios[:step]), Fraction(0))
            if exact.denominator.bit_length() > EXACT_BITS:
                exact = None
        n += step
        lo, hi = cum_lo[step], cum_hi[step]

    return SamplerState(k=k, n_terms=n, ell=ell, s=s, eps_hat=eps, prec=prec,
                        sum_lo=lo, sum_hi=hi, exact_sum=exact)


def _decide(provider, n, exact, eps, ell, k, lo, hi, elo, ehi, thresholds) -> int:
    s = _choose(lo, hi, elo, ehi, *thresholds)
    if s is None:
        s = _exact_choice(provider, n, exact, eps, ell, k)
    return s


def _scan(provider, n0, prec, cum_lo, cum_hi, thresholds, ell, k):
    """Find the first of the buffered partial sums where a choice is made.

    Blocks of terms are skipped whole when the bounds at their two ends
    already rule out every test at the points inside: partial sums only grow
    and the error bound only shrinks, so ``S_a + eps(b)`` and ``S_b`` bound
    every interior ``S + eps`` from below and ``S`` from above. Blocks that
    cannot be ruled out are split in two. Returns ``(offset, s, eps)`` at
    the stopping point, or the last offset with ``s == -1``.
    """
    t_top, t_mid_lo, t_mid_hi = thresholds
    errors = {}

    def error_at(i):
        if i not in errors:
            errors[i] = provider.error_bound(n0 + i)
        return errors[i]

    last = len(cum_lo) - 1
    stack = [(0, last)]
    while stack:
        a, b = stack.pop()
        eps_b = error_at(b)
        elo_b, ehi_b = _scaled(eps_b, prec)
        if b - a > 1:
            low_top = cum_lo[a] + elo_b
            high_sum = cum_hi[b]
            ruled_out = (low_top > t_top and high_sum <= t_top
                         and (high_sum <= t_mid_lo or low_top > t_mid_hi))
            if not ruled_out:
                mid = (a + b) // 2
                stack.append((mid, b))
                stack.append((a, mid))
                continue
        s = _decide(provider, n0 + b, None, eps_b, ell, k,
                    cum_lo[b], cum_hi[b], elo_b, ehi_b, thresholds)
        if s >= 0:
            return b, s, eps_b
    return last, -1, error_at(last)


def _choose(lo, hi, elo, ehi, t_top, t_mid_lo, t_mid_hi):
    """Apply the three tests on the enclosure, in order.

    Returns 0, 1 or 2 for the chosen half, -1 when more terms are needed and
    None when the enclosure cannot decide.
    """
    slo, shi = lo + elo, hi + ehi
    below = _le(slo, shi, t_top)
    if below is None:
        return None
    if below:
        return 0
    above = _gt(lo, hi, t_top)
    if above is None:
        return None
    if above:
        return 2
    mid_lo = _gt(lo, hi, t_mid_lo)
    mid_hi = _le(slo, shi, t_mid_hi)
    if mid_lo is False or mid_hi is False:
        return -1
    if mid_lo and mid_hi:
        return 1
    return None


def _exact_choice(provider, n, exact, eps, ell, k):
    """Same as :func:`_choose`, in exact arithmetic."""
    if exact is None:
        exact = partial_sum(provider, n)
    w = Fraction(1, 2 ** k)
    top = exact + eps
    if top <= ell + w:
        return 0
    if exact > ell + w:
        return 2
    if exact > ell + w / 2 and top <= ell + 3 * w / 2:
        return 1
    return -1


def _output(s: int, source: BitSource) -> Tuple[int, int]:
    """Output bit and extra inputs used, given the final choice ``s``."""
    if s == 0:
        return 0, 0
    if s == 2:
        return 1, 0
    return source.next_bit(), 1


def sample(provider: SeriesProvider, source: BitSource,
           max_terms: Optional[int] = None) -> Trace:
    """Draw one theta-coin, recomputing the schedule from scratch.

    On :class:`SourceExhausted` the exception gets a ``schedule`` attribute
    holding the iterations completed so far.
    """
    provider = monotone_envelope(provider)
    state = INITIAL_STATE
    schedule: List[Tuple[int, int]] = []
    try:
        while True:
            if state.k >= MAX_ITERATIONS:
                raise IterationCapExceeded(f"no stop after {MAX_ITERATIONS} iterations")
            state = advance_iteration(state, provider, max_terms)
            schedule.append((state.n_terms, state.s))
            if source.next_bit() == 0:
                break
        y, extra = _output(state.s, source)
    except SourceExhausted as exc:
        exc.schedule = tuple(schedule)
        raise
    if provider.negate_output:
        y = 1 - y
    return Trace(y=y, m=state.k, l=state.k + extra, n_m=state.n_terms, schedule=tuple(schedule))


class MemoizedEngine:
    """Sampler that caches the per-iteration snapshots of one provider.

    Snapshots are deterministic, so a sample only computes new ones when it
    reaches an iteration index no earlier sample reached. Traces match
    :func:`sample` bit for bit. Not thread-safe; use one engine per worker.
    """

    def __init__(self, provider: SeriesProvider, max_terms: Optional[int] = None):
        self.provider = monotone_envelope(provider)
        self.max_terms = default_max_terms() if max_terms is None else max_terms
        self.states: List[SamplerState] = [INITIAL_STATE]
        self._s: List[int] = []
        self._n: List[int] = []

    @property
    def depth(self) -> int:
        """Number of iterations cached so far."""
        return len(self._s)

    def state(self, k: int) -> SamplerState:
        self.extend(k)
        return self.states[k]

    def extend(self, k: int) -> None:
        if k > MAX_ITERATIONS:
            raise IterationCapExceeded(f"no stop after {MAX_ITERATIONS} iterations")
        while len(self.states) <= k:
            nxt = advance_iteration(self.states[-1], self.provider, self.max_terms)
            self.states.append(nxt)
            self._s.append(nxt.s)
            self._n.append(nxt.n_terms)

    def schedule(self, depth: int) -> List[Tuple[int, int]]:
        self.extend(depth)
        return list(zip(self._n[:depth], self._s[:depth]))

    def draw(self, source: BitSource) -> Tuple[int, int, int, int]:
        """One sample as a ``(y, m, l, n_m)`` tuple, without the schedule."""
        s_cache = self._s
        k = 0
        try:
            while True:
                k += 1
                if k > len(s_cache):
                    self.extend(k)
                if not source.next_bit():
                    break
            s = s_cache[k - 1]
            if s == 1:
                y, l = source.next_bit(), k + 1
            else:
                y, l = s >> 1, k
        except SourceExhausted as exc:
            exc.iterations = k
            raise
        if self.provider.negate_output:
            y = 1 - y
        return y, k, l, self._n[k - 1]

    def sample(self, source: BitSource) -> Trace:
        try:
            y, m, l, n_m = self.draw(source)
        except SourceExhausted as exc:
            done = exc.iterations
            exc.schedule = tuple(zip(self._n[:done], self._s[:done]))
            raise
        return Trace(y=y, m=m, l=l, n_m=n_m, schedule=tuple(zip(self._n[:m], self._s[:m])))


def sample_rational(n: int, d: int, source: BitSource) -> Trace:
    """Direct sampler for ``theta = n/d`` by rejection on ``nbd(d)``-bit integers."""
    if not 0 < n < d:
        raise ValueError(f"need 0 < n < d, got {n}/{d}")
    b = nbd(d)
    rounds = 0
    while True:
        rounds += 1
        t = 0
        for _ in range(b):
            t = (t << 1) | source.next_bit()
        if t <= d - 1:
            break
    return Trace(y=int(t <= n - 1), m=rounds, l=b * rounds, n_m=0)
