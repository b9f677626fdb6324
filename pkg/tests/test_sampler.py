from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from buffon.coins import ReplaySource, SourceExhausted, seeded_source
from buffon.constants import GammaProvider, Ln2Provider, PiQuarterProvider
from buffon.sampler import (
    INITIAL_STATE,
    MAX_ITERATIONS,
    IterationCapExceeded,
    MemoizedEngine,
    ProviderDivergence,
    advance_iteration,
    sample,
    sample_rational,
)
from buffon.series import SeriesProvider, complemented, monotone_envelope, partial_sum, rational_provider
from buffon.stats import exact_mass
from conftest import REFERENCES


def test_initial_state():
    st0 = INITIAL_STATE
    assert (st0.k, st0.n_terms, st0.s) == (0, 0, 0)
    assert st0.ell == 0 and st0.eps_hat == 1 and st0.ell_hat == 0


def test_gamma_first_iterations():
    p = monotone_envelope(GammaProvider())
    s1 = advance_iteration(INITIAL_STATE, p)
    assert (s1.n_terms, s1.s) == (2, 2)
    assert s1.ell == 0
    assert s1.ell_hat == Fraction(13, 24) and s1.eps_hat == Fraction(1, 4)
    assert s1.interval == (Fraction(1, 2), Fraction(1))
    s2 = advance_iteration(s1, p)
    assert (s2.n_terms, s2.s) == (3, 0)
    assert s2.ell_hat == Fraction(67, 120) and s2.eps_hat == Fraction(9, 128)
    assert s2.interval == (Fraction(1, 2), Fraction(3, 4))


def test_hand_schedules(engines):
    assert engines["gamma"].schedule(6) == [(2, 2), (3, 0), (4, 0), (4, 2), (5, 0), (6, 1)]
    assert engines["pi4"].schedule(6) == [(1, 2), (1, 2), (1, 0), (1, 0), (1, 1), (1, 1)]
    assert engines["ln2"].schedule(6) == [(1, 2), (1, 0), (1, 2), (2, 2), (2, 0), (2, 0)]


@pytest.mark.parametrize("bits, expected", [
    ([0], (1, 1, 1, 2)),
    ([1, 1, 0], (0, 3, 3, 4)),
])
def test_gamma_traces(bits, expected):
    t = sample(GammaProvider(), ReplaySource(bits))
    assert (t.y, t.m, t.l, t.n_m) == expected


def test_s1_stop_draws_extra_bit():
    # gamma stops at iteration 6 with s = 1: one more bit is the output
    for extra in (0, 1):
        t = sample(GammaProvider(), ReplaySource([1] * 5 + [0, extra]))
        assert (t.y, t.m, t.l) == (extra, 6, 7)


def test_exhaustion_reports_partial_schedule():
    with pytest.raises(SourceExhausted) as info:
        sample(GammaProvider(), ReplaySource([1]))
    assert info.value.schedule == ((2, 2), (3, 0))
    engine = MemoizedEngine(GammaProvider())
    with pytest.raises(SourceExhausted) as info:
        engine.sample(ReplaySource([1, 1, 1, 1, 1, 0]))
    assert info.value.schedule[-1] == (6, 1)


def test_trace_serialization():
    t = sample(GammaProvider(), ReplaySource("110"))
    assert t.to_dict() == {"y": 0, "m": 3, "l": 3, "n_m": 4,
                           "schedule": [[2, 2], [3, 0], [4, 0]]}


@pytest.mark.parametrize("name", ["gamma", "pi4", "ln2"])
def test_state_invariants(engines, name):
    engine = engines[name]
    depth = 40 if name == "gamma" else 60
    prev_lo, prev_hi = Fraction(0), Fraction(1)
    prev_n = 0
    for k in range(1, depth + 1):
        state = engine.state(k)
        assert state.k == k
        assert state.s in (0, 1, 2)
        lo, hi = state.interval
        assert hi - lo == Fraction(1, 2 ** k)
        assert (lo * 2 ** (k + 1)).denominator == 1
        assert (state.ell * 2 ** k).denominator == 1
        assert prev_lo <= lo and hi <= prev_hi
        assert state.n_terms >= prev_n
        prev_lo, prev_hi, prev_n = lo, hi, state.n_terms


@pytest.mark.parametrize("name", ["pi4", "ln2", "gamma"])
def test_chosen_condition_holds_exactly(engines, name):
    engine = engines[name]
    depth = 18 if name == "gamma" else 60
    for k in range(1, depth + 1):
        state = engine.state(k)
        total = state.ell_hat
        if total is None:
            total = partial_sum(engine.provider, state.n_terms)
        top = total + state.eps_hat
        w = Fraction(1, 2 ** k)
        ell = state.ell
        conds = (top <= ell + w,
                 total > ell + w,
                 total > ell + w / 2 and top <= ell + 3 * w / 2)
        # tests run in the order s = 0, 2, 1
        assert (0, 2, 1)[conds.index(True)] == state.s


@pytest.mark.parametrize("name", ["pi4", "ln2", "gamma"])
def test_intervals_bracket_reference(engines, name):
    ref = REFERENCES[name]
    depth = 40 if name == "gamma" else 60
    for k in range(1, depth + 1):
        lo, hi = engines[name].state(k).interval
        assert lo < ref <= hi, k


def test_schedule_independent_of_source(engines):
    ref = engines["gamma"].schedule(12)
    for seed in range(300):
        t = sample(GammaProvider(), seeded_source(seed))
        if t.m <= 12:
            assert list(t.schedule) == ref[: t.m]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=40))
def test_replayed_prefixes_follow_schedule(bits):
    engine = MemoizedEngine(PiQuarterProvider())
    try:
        t = sample(PiQuarterProvider(), ReplaySource(bits))
    except SourceExhausted:
        return
    assert list(t.schedule) == engine.schedule(t.m)
    assert t.l == t.m + (t.schedule[-1][1] == 1)
    assert bits[: t.m] == [1] * (t.m - 1) + [0]
    s = t.schedule[-1][1]
    if s != 1:
        assert t.y == s // 2
    else:
        assert t.y == bits[t.m]


def _enumerate_paths(provider_cls, depth):
    """Exact Pr[Y=1] over all stopping paths up to ``depth``, by replaying bits."""
    total = Fraction(0)
    for m in range(1, depth + 1):
        prefix = [1] * (m - 1) + [0]
        for extra in ((), (0,), (1,)):
            bits = prefix + list(extra)
            try:
                t = sample(provider_cls(), ReplaySource(bits))
            except SourceExhausted:
                continue
            if t.l != len(bits):
                continue
            if t.y:
                total += Fraction(1, 2 ** len(bits))
    return total


@pytest.mark.parametrize("cls", [GammaProvider, PiQuarterProvider, Ln2Provider])
def test_path_enumeration_matches_exact_mass(cls):
    depth = 12
    assert _enumerate_paths(cls, depth) == exact_mass(cls(), depth).p_one_low


def test_memoized_matches_unmemoized():
    engine = MemoizedEngine(GammaProvider())
    for i in range(1000):
        a = sample(GammaProvider(), seeded_source(99, i))
        b = engine.sample(seeded_source(99, i))
        assert a == b


def test_cache_hit_computes_no_terms():
    provider = GammaProvider()
    engine = MemoizedEngine(provider)
    first = engine.sample(ReplaySource("11111101"))
    evals = provider.term_evals
    second = engine.sample(ReplaySource("11111101"))
    assert first == second
    assert provider.term_evals == evals


def test_term_evaluations_equal_deepest_n():
    provider = GammaProvider()
    engine = MemoizedEngine(provider)
    deepest = 0
    for i in range(10**4):
        _, _, _, n_m = engine.draw(seeded_source(5, i))
        deepest = max(deepest, n_m)
    assert deepest == engine.states[-1].n_terms
    assert provider.term_evals == deepest


def test_complement_flips_output():
    for bits in ("0", "10", "110", "1110"):
        a = sample(rational_provider(1, 3), ReplaySource(bits + "0"))
        b = sample(complemented(rational_provider(1, 3)), ReplaySource(bits + "0"))
        assert a.y == 1 - b.y and a.schedule == b.schedule


def test_dyadic_half_terminates():
    p = rational_provider(1, 2)
    for i in range(2000):
        t = sample(p, seeded_source(11, i))
        assert t.m < 64


def test_rational_provider_schedule_is_binary_expansion():
    # for theta = 1/3 = 0.010101..., with a zero error bound every iteration
    # needs one term and the exact law is dyadic-truncated 1/3
    bracket = exact_mass(rational_provider(1, 3), 40)
    assert all(n == 1 for n, _ in bracket.schedule)
    assert bracket.contains(Fraction(1, 3))


@pytest.mark.parametrize("n, d", [(1, 2), (1, 3), (3, 4), (2, 7)])
def test_sample_rational_enumeration(n, d):
    # one round of b bits, accepted with probability d / 2^b
    b = d.bit_length()
    hits = accepted = 0
    for bits in product((0, 1), repeat=b):
        try:
            t = sample_rational(n, d, ReplaySource(list(bits)))
        except SourceExhausted:
            continue
        accepted += 1
        hits += t.y
        assert t.l == b and t.m == 1
    assert accepted == d
    assert Fraction(hits, accepted) == Fraction(n, d)


def test_sample_rational_rejects_bad_input():
    for n, d in ((0, 3), (3, 3), (4, 3)):
        with pytest.raises(ValueError):
            sample_rational(n, d, seeded_source(0))


class _Stuck(SeriesProvider):
    name = "stuck"

    def term(self, j):
        return Fraction(1, 2 ** (j + 2))

    def _error(self, n):
        return Fraction(1, 2)


def test_divergence_cap():
    with pytest.raises(ProviderDivergence):
        sample(_Stuck(), seeded_source(0), max_terms=50)


def test_env_var_sets_max_terms(monkeypatch):
    bits = [1] * 20 + [0, 0]
    monkeypatch.setenv("BUFFON_MAX_TERMS", "10")
    with pytest.raises(ProviderDivergence):
        sample(GammaProvider(), ReplaySource(bits))
    monkeypatch.delenv("BUFFON_MAX_TERMS")
    assert sample(GammaProvider(), ReplaySource(bits)).m == 21


def test_iteration_cap():
    with pytest.raises(IterationCapExceeded):
        sample(rational_provider(1, 3), ReplaySource([1] * (MAX_ITERATIONS + 5)))
