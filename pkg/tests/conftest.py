from fractions import Fraction

import pytest

from buffon.constants import GammaProvider, Ln2Provider, PiQuarterProvider
from buffon.sampler import MemoizedEngine
from buffon.stats import ENUMERATION_MAX_TERMS, run_trials

# 52 significant digits; only used to check brackets that are far wider
GAMMA_REF = Fraction("0.5772156649015328606065120900824024310421593359399236")
PI4_REF = Fraction("0.7853981633974483096156608458198757210492923498437765")
LN2_REF = Fraction("0.6931471805599453094172321214581765680755001343602553")

REFERENCES = {"gamma": GAMMA_REF, "pi4": PI4_REF, "ln2": LN2_REF}
PROVIDERS = {"gamma": GammaProvider, "pi4": PiQuarterProvider, "ln2": Ln2Provider}



def wide_reference(name: str, digits: int):
    """``(lo, hi)`` with ``lo < theta < hi`` and ``hi - lo = 2 * 10**-digits``, via mpmath."""
    import mpmath

    with mpmath.workdps(digits + 20):
        value = {"gamma": lambda: mpmath.euler,
                 "pi4": lambda: mpmath.pi / 4,
                 "ln2": lambda: mpmath.log(2)}[name]()
        scaled = int(mpmath.floor(value * mpmath.mpf(10) ** digits))
    return Fraction(scaled - 1, 10**digits), Fraction(scaled + 1, 10**digits)


MC_TRIALS = 10**6
MC_SEED = 20240611


@pytest.fixture(scope="session")
def engines():
    """One memoized engine per built-in, shared so deep schedules are computed once."""
    return {name: MemoizedEngine(cls(), max_terms=ENUMERATION_MAX_TERMS)
            for name, cls in PROVIDERS.items()}


@pytest.fixture(scope="session")
def mc_runs():
    """10^6-trial runs for gamma and pi/4, with their wall-clock times."""
    import time

    out = {}
    for name in ("gamma", "pi4"):
        start = time.perf_counter()
        summary = run_trials(PROVIDERS[name](), MC_TRIALS, MC_SEED)
        out[name] = (summary, time.perf_counter() - start)
    return out
