"""Fair-bit sources.

The sampler only ever asks for one unbiased bit at a time. Sources count the
bits they hand out, so the number of inputs a sample consumed can be read off
the source.

Seeded sources use SplitMix64. Each ``(master_seed, stream_index)`` pair is
hashed into an independent starting state, so per-trial streams can be built
in any order, on any worker, and still reproduce.
"""

from __future__ import annotations

from typing import Iterable

PRNG_NAME = "splitmix64"
PRNG_VERSION = "1"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SourceExhausted(Exception):
    """A replay source ran out of stored bits."""


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class BitSource:
    """Base class: subclasses implement :meth:`_draw`."""

    def __init__(self):
        self.consumed = 0

    def next_bit(self) -> int:
        bit = self._draw()
        self.consumed += 1
        return bit

    def _draw(self) -> int:
        raise NotImplementedError


class ReplaySource(BitSource):
    """Yields a fixed bit sequence, then raises :class:`SourceExhausted`."""

    def __init__(self, bits: Iterable[int] | str):
        super().__init__()
        if isinstance(bits, str):
            if not bits or set(bits) - {"0", "1"}:
                raise ValueError(f"bit string must be nonempty over {{0,1}}: {bits!r}")
            bits = [int(c) for c in bits]
        self.bits = [int(b) for b in bits]
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("replay bits must be 0 or 1")

    def _draw(self) -> int:
        if self.consumed >= len(self.bits):
            raise SourceExhausted(f"replay source exhausted after {len(self.bits)} bits")
        return self.bits[self.consumed]


class SplitMix64Source(BitSource):
    """SplitMix64 output, consumed least-significant bit first."""

    def __init__(self, state: int):
        super().__init__()
        self._state = state & _MASK64
        self._word = 0
        self._left = 0

    def next_word(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix64(self._state)

    def next_bit(self) -> int:
        # inlined _draw; this is the hot path of every Monte Carlo run
        if not self._left:
            self._word = self.next_word()
            self._left = 64
        bit = self._word & 1
        self._word >>= 1
        self._left -= 1
        self.consumed += 1
        return bit

    def _draw(self) -> int:  # pragma: no cover - next_bit is overridden
        raise AssertionError


def stream_state(master_seed: int, stream_index: int) -> int:
    """Starting SplitMix64 state for one stream."""
    if stream_index < 0:
        raise ValueError("stream_index must be non-negative")
    base = _mix64(master_seed & _MASK64)
    return _mix64((base + stream_index * _GOLDEN + 1) & _MASK64)


def seeded_source(master_seed: int, stream_index: int = 0) -> SplitMix64Source:
    return SplitMix64Source(stream_state(master_seed, stream_index))


def prng_identity() -> dict:
    return {"name": PRNG_NAME, "version": PRNG_VERSION, "stream_seeding": "mix64(mix64(seed) + index*phi + 1)"}
