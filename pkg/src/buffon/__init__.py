"""Exact Bernoulli(theta) sampling from fair bits using rational arithmetic."""

from .coins import BitSource, ReplaySource, SourceExhausted, seeded_source
from .constants import GammaProvider, Ln2Provider, PiQuarterProvider, get_provider
from .sampler import (
    MemoizedEngine,
    SamplerState,
    Trace,
    advance_iteration,
    sample,
    sample_rational,
)
from .series import (
    SeriesProvider,
    alternating_adapter,
    complemented,
    monotone_envelope,
    rational_provider,
)
from .stats import MassBracket, Summary, exact_mass, run_trials, tail_report

__version__ = "0.1.0"

__all__ = [
    "BitSource", "ReplaySource", "SourceExhausted", "seeded_source",
    "GammaProvider", "Ln2Provider", "PiQuarterProvider", "get_provider",
    "MemoizedEngine", "SamplerState", "Trace", "advance_iteration", "sample", "sample_rational",
    "SeriesProvider", "alternating_adapter", "complemented", "monotone_envelope", "rational_provider",
    "MassBracket", "Summary", "exact_mass", "run_trials", "tail_report",
]
