"""Monte Carlo runs, the exact output-law oracle, and tail-bound reports.

``exact_mass`` is the randomness-free check: the schedule fixes
``Pr[Y=1]`` as a dyadic series, and its truncation at depth ``B`` brackets
the target to within ``2**-B``. The Monte Carlo side (``run_trials``,
``tail_report``) is confirmatory.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

from .coins import SplitMix64Source, prng_identity, stream_state
from .rational import format_rational
from .sampler import MemoizedEngine
from .series import SeriesProvider, monotone_envelope

ENUMERATION_MAX_TERMS = 1 << 24


class TrialError(RuntimeError):
    """A sampler error, tagged with the trial that raised it."""

    def __init__(self, trial_index: int, cause: BaseException):
        super().__init__(f"trial {trial_index}: {type(cause).__name__}: {cause}")
        self.trial_index = trial_index


@dataclass
class Summary:
    """Aggregates over a batch of trials.

    Sums and histograms are integers, so merging shards is exact and the
    result does not depend on how trials were split.
    """

    provider: str = ""
    seed: int = 0
    trials: int = 0
    sum_y: int = 0
    sum_m: int = 0
    sum_l: int = 0
    sum_nm: int = 0
    hist_m: Dict[int, int] = field(default_factory=dict)
    hist_l: Dict[int, int] = field(default_factory=dict)
    hist_nm: Dict[int, int] = field(default_factory=dict)
    prng: dict = field(default_factory=prng_identity)

    def merge(self, other: "Summary") -> "Summary":
        out = Summary(provider=self.provider or other.provider, seed=self.seed, prng=self.prng)
        out.trials = self.trials + other.trials
        out.sum_y = self.sum_y + other.sum_y
        out.sum_m = self.sum_m + other.sum_m
        out.sum_l = self.sum_l + other.sum_l
        out.sum_nm = self.sum_nm + other.sum_nm
        for name in ("hist_m", "hist_l", "hist_nm"):
            merged = Counter(getattr(self, name))
            merged.update(getattr(other, name))
            setattr(out, name, dict(sorted(merged.items())))
        return out

    @property
    def mean_y(self) -> float:
        return self.sum_y / self.trials

    @property
    def mean_m(self) -> float:
        return self.sum_m / self.trials

    @property
    def mean_l(self) -> float:
        return self.sum_l / self.trials

    @property
    def mean_nm(self) -> float:
        return self.sum_nm / self.trials

    @property
    def max_l(self) -> int:
        return max(self.hist_l, default=0)

    @property
    def max_nm(self) -> int:
        return max(self.hist_nm, default=0)

    @staticmethod
    def _exceeding(hist: Dict[int, int], x: int) -> int:
        return sum(c for v, c in hist.items() if v > x)

    def count_l_above(self, l: int) -> int:
        return self._exceeding(self.hist_l, l)

    def count_nm_above(self, n: int) -> int:
        return self._exceeding(self.hist_nm, n)

    def count_m_at_least(self, m: int) -> int:
        return self._exceeding(self.hist_m, m - 1)

    @property
    def tail_l(self) -> List[int]:
        """Counts of ``L > l`` for ``l = 1 .. max_l``."""
        return [self.count_l_above(l) for l in range(1, self.max_l + 1)]

    @property
    def tail_nm(self) -> List[int]:
        """Counts of ``N_M > n`` for ``n = 1 .. max_nm``."""
        return [self.count_nm_above(n) for n in range(1, self.max_nm + 1)]

    def to_dict(self) -> dict:
        def ratio(total):
            return format_rational(Fraction(total, self.trials))

        return {
            "provider": self.provider,
            "seed": self.seed,
            "prng": self.prng,
            "trials": self.trials,
            "mean_y": ratio(self.sum_y),
            "mean_m": ratio(self.sum_m),
            "mean_l": ratio(self.sum_l),
            "mean_nm": ratio(self.sum_nm),
            "max_l": self.max_l,
            "max_nm": self.max_nm,
            "tail_l": self.tail_l,
            "tail_nm": self.tail_nm,
            "hist_m": {str(k): v for k, v in sorted(self.hist_m.items())},
            "hist_l": {str(k): v for k, v in sorted(self.hist_l.items())},
            "hist_nm": {str(k): v for k, v in sorted(self.hist_nm.items())},
            "approximate": {
                "mean_y": self.mean_y,
                "mean_m": self.mean_m,
                "mean_l": self.mean_l,
                "mean_nm": self.mean_nm,
            },
        }


def _run_range(provider: SeriesProvider, master_seed: int, first: int, stop: int,
               max_terms: Optional[int]) -> Summary:
    engine = MemoizedEngine(provider, max_terms)
    draw = engine.draw
    hist_m, hist_l, hist_nm = Counter(), Counter(), Counter()
    sum_y = 0
    for i in range(first, stop):
        try:
            y, m, l, nm = draw(SplitMix64Source(stream_state(master_seed, i)))
        except Exception as exc:
            raise TrialError(i, exc) from exc
        sum_y += y
        hist_m[m] += 1
        hist_l[l] += 1
        hist_nm[nm] += 1
    out = Summary(provider=provider.name, seed=master_seed, trials=stop - first, sum_y=sum_y)
    out.sum_m = sum(k * c for k, c in hist_m.items())
    out.sum_l = sum(k * c for k, c in hist_l.items())
    out.sum_nm = sum(k * c for k, c in hist_nm.items())
    out.hist_m = dict(sorted(hist_m.items()))
    out.hist_l = dict(sorted(hist_l.items()))
    out.hist_nm = dict(sorted(hist_nm.items()))
    return out


# set before forking so shard workers inherit the provider without pickling it
_SHARED_PROVIDER: Optional[SeriesProvider] = None


def _run_shard(args):
    master_seed, first, stop, max_terms = args
    return _run_range(_SHARED_PROVIDER, master_seed, first, stop, max_terms)


def run_trials(provider: SeriesProvider, trials: int, master_seed: int = 0,
               shards: int = 1, max_terms: Optional[int] = None) -> Summary:
    """Run ``trials`` independent samples; trial ``i`` reads stream ``i`` of
    ``master_seed``. With ``shards > 1`` contiguous index ranges run in
    forked worker processes; the merged summary is the same either way."""
    global _SHARED_PROVIDER
    if trials < 1:
        raise ValueError("trials must be at least 1")
    shards = max(1, min(shards, trials))
    bounds = [trials * i // shards for i in range(shards + 1)]
    if shards == 1:
        parts = [_run_range(provider, master_seed, 0, trials, max_terms)]
    else:
        _SHARED_PROVIDER = provider
        try:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=shards, mp_context=ctx) as pool:
                jobs = [(master_seed, bounds[i], bounds[i + 1], max_terms) for i in range(shards)]
                parts = list(pool.map(_run_shard, jobs))
        finally:
            _SHARED_PROVIDER = None
    total = Summary(provider=provider.name, seed=master_seed)
    for part in parts:
        total = total.merge(part)
    return total


@dataclass(frozen=True)
class MassBracket:
    """``p_one_low <= Pr[Y=1] <= p_one_low + unresolved``, exactly."""

    depth: int
    p_one_low: Fraction
    unresolved: Fraction
    schedule: tuple = ()

    @property
    def upper(self) -> Fraction:
        return self.p_one_low + self.unresolved

    def contains(self, x) -> bool:
        return self.p_one_low <= x <= self.upper

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "p_one_low": format_rational(self.p_one_low),
            "unresolved": format_rational(self.unresolved),
            "p_one_high": format_rational(self.upper),
            "schedule": [list(p) for p in self.schedule],
            "approximate": {
                "p_one_low": float(self.p_one_low),
                "p_one_high": float(self.upper),
            },
        }


def exact_mass(provider: SeriesProvider, depth: int,
               max_terms: Optional[int] = None) -> MassBracket:
    """Exact bracket on ``Pr[Y=1]`` from the first ``depth`` iterations.

    The run stops at iteration ``m`` with probability ``2**-m``; it then
    outputs 1 surely if ``s_m = 2`` and with probability 1/2 if ``s_m = 1``.
    Runs still going after ``depth`` iterations carry mass ``2**-depth``.
    The term cap defaults to ``BUFFON_MAX_TERMS`` if set, else
    ``ENUMERATION_MAX_TERMS``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if max_terms is None:
        env = os.environ.get("BUFFON_MAX_TERMS")
        max_terms = int(env) if env else ENUMERATION_MAX_TERMS
    engine = MemoizedEngine(provider, max_terms)
    schedule = engine.schedule(depth)
    low = Fraction(0)
    for m, (_, s) in enumerate(schedule, start=1):
        if s == 2:
            low += Fraction(1, 2 ** m)
        elif s == 1:
            low += Fraction(1, 2 ** (m + 1))
    unresolved = Fraction(1, 2 ** depth)
    if engine.provider.negate_output:
        low = 1 - low - unresolved
    return MassBracket(depth=depth, p_one_low=low, unresolved=unresolved, schedule=tuple(schedule))


@dataclass(frozen=True)
class TailRow:
    index: int
    count: int
    empirical: float
    bound: Fraction
    checked: bool
    flagged: bool


@dataclass(frozen=True)
class TailReport:
    trials: int
    inputs: List[TailRow]
    terms: List[TailRow]

    @property
    def flags(self) -> List[str]:
        out = [f"Pr[L > {r.index}]" for r in self.inputs if r.flagged]
        out += [f"Pr[N_M > {r.index}]" for r in self.terms if r.flagged]
        return out

    @property
    def ok(self) -> bool:
        return not self.flags

    def rows(self):
        """Flat rows: (quantity, index, count, empirical, bound, checked, flagged)."""
        for name, rows in (("L", self.inputs), ("N_M", self.terms)):
            for r in rows:
                yield name, r.index, r.count, r.empirical, r.bound, r.checked, r.flagged

    def to_dict(self) -> dict:
        def render(r: TailRow) -> dict:
            return {"index": r.index, "count": r.count, "bound": format_rational(r.bound),
                    "checked": r.checked, "flagged": r.flagged,
                    "approximate": {"empirical": r.empirical, "bound": float(r.bound)}}

        return {"trials": self.trials, "ok": self.ok, "flags": self.flags,
                "L": [render(r) for r in self.inputs],
                "N_M": [render(r) for r in self.terms]}


def slack(p: float, trials: int, sigmas: float = 5.0) -> float:
    """``sigmas`` binomial standard deviations of a proportion ``p``."""
    p = min(max(p, 0.0), 1.0)
    return sigmas * math.sqrt(p * (1 - p) / trials)


def tail_report(summary: Summary, provider: SeriesProvider,
                min_count: int = 100, sigmas: float = 5.0) -> TailReport:
    """Compare empirical tails with ``Pr[L > l] <= 2**(1-l)`` and
    ``Pr[N_M > n] < 4 eps(n)``.

    Cells with fewer than ``min_count`` exceedances are reported but not
    checked. A checked cell is flagged when it exceeds its bound by more
    than ``sigmas`` binomial standard deviations.
    """
    if summary.trials < 1:
        raise ValueError("empty summary")
    provider = monotone_envelope(provider)
    n = summary.trials

    def row(index, count, bound):
        empirical = count / n
        checked = count >= min_count
        b = float(bound)
        flagged = checked and empirical > b + slack(b, n, sigmas)
        return TailRow(index, count, empirical, bound, checked, flagged)

    inputs = [row(l, summary.count_l_above(l), Fraction(2, 2 ** l))
              for l in range(1, summary.max_l + 1)]
    terms = [row(k, summary.count_nm_above(k), 4 * provider.error_bound(k))
             for k in range(1, summary.max_nm + 1)]
    return TailReport(trials=n, inputs=inputs, terms=terms)
