"""Deterministic 64-bit random streams used by every allocation run.

The generator is SplitMix64 (Vigna's public-domain reference): the state
advances by a fixed odd increment and each output is an avalanche finalizer
of the state, so the raw word stream for seed ``s`` is

    raw[j] = fmix64((s + (j + 1) * GAMMA) mod 2**64),   j = 0, 1, 2, ...

Because the state is an arithmetic progression, a block of raw words can be
produced with vectorized uint64 arithmetic that is bit-identical to the
sequential path; traces are therefore portable across platforms and worker
counts.

Bounded draws on ``[0, n)`` use rejection sampling against the largest
multiple of ``n`` below 2**64, so there is no modulo bias.  A rejected raw
word is consumed and the next word is tried; for ``n <= 10**8`` a rejection
is a ~5e-12 per-draw event.

Seed derivation (per-trial seeds, per-run stream seeds) uses the same
finalizer: ``mix_seeds(seed, i) = fmix64((seed + (i + 1) * GAMMA) mod 2**64)``,
i.e. entry ``i`` of the SplitMix64 output stream for ``seed``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ConfigurationError

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB

_U_GAMMA = np.uint64(GAMMA)
_U_MUL_1 = np.uint64(MIX_MUL_1)
_U_MUL_2 = np.uint64(MIX_MUL_2)


def fmix64(x: int) -> int:
    """SplitMix64 output finalizer on a 64-bit state word."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * MIX_MUL_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL_2) & MASK64
    return z ^ (z >> 31)


def _fmix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized fmix64 over a uint64 array (wraps like C uint64)."""
    z = (z ^ (z >> np.uint64(30))) * _U_MUL_1
    z = (z ^ (z >> np.uint64(27))) * _U_MUL_2
    return z ^ (z >> np.uint64(31))


def mix_seeds(seed: int, index: int) -> int:
    """Derive a child seed from (seed, index) with full 64-bit avalanche.

    This is the published derivation for per-trial seeds and per-run stream
    seeds: entry ``index`` of the SplitMix64 output stream seeded with
    ``seed``.  Distinct indices always yield distinct child seeds because the
    finalizer is a bijection on 64-bit words.
    """
    return fmix64(seed + (index + 1) * GAMMA)


class RngStream:
    """A seeded deterministic stream of uniform draws.

    ``counter`` counts raw 64-bit words consumed, ``draws`` counts bounded
    draws delivered; they differ only in the astronomically rare event that
    rejection sampling discards a word.
    """

    __slots__ = ("seed", "counter", "draws")

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.counter = 0
        self.draws = 0

    def next_u64(self) -> int:
        """Next raw 64-bit word."""
        self.counter += 1
        return fmix64(self.seed + self.counter * GAMMA)

    def next_bounded(self, n: int) -> int:
        """Uniform draw on [0, n) via rejection sampling (no modulo bias)."""
        if n <= 0:
            raise ConfigurationError(f"draw bound must be positive, got {n}")
        remainder = (1 << 64) % n
        limit = (1 << 64) - remainder  # accept raw words below this
        while True:
            word = self.next_u64()
            if word < limit:
                self.draws += 1
                return word % n

    def bounded_block(self, n: int, count: int) -> np.ndarray:
        """Vectorized batch of ``count`` bounded draws.

        Produces exactly the sequence ``[next_bounded(n) for _ in
        range(count)]`` would, including rejection-sampling consumption, and
        leaves the stream in the identical position.  The result is an int64
        array, so the bound must not exceed 2**63; use ``next_bounded`` for
        larger bounds.
        """
        if n <= 0:
            raise ConfigurationError(f"draw bound must be positive, got {n}")
        if n > 1 << 63:
            raise ConfigurationError(
                f"vectorized draws support bounds up to 2**63, got {n}"
            )
        if count < 0:
            raise ConfigurationError(f"draw count must be non-negative, got {count}")
        remainder = (1 << 64) % n
        limit = np.uint64((1 << 64) - remainder) if remainder else None
        useed = np.uint64(self.seed)
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            need = count - filled
            chunk = need + 8
            idx = np.arange(self.counter + 1, self.counter + chunk + 1, dtype=np.uint64)
            raw = _fmix64_array(useed + idx * _U_GAMMA)
            if limit is None:
                taken = need
                accepted = raw[:need]
                consumed = need
            else:
                ok = np.flatnonzero(raw < limit)
                taken = min(need, len(ok))
                accepted = raw[ok[:taken]]
                consumed = int(ok[taken - 1]) + 1 if taken else chunk
            out[filled : filled + taken] = (accepted % np.uint64(n)).astype(np.int64)
            filled += taken
            self.counter += consumed
        self.draws += count
        return out


class FixedStream:
    """A stream that replays a preset sequence of bounded draws.

    Used by the exact-enumeration oracle and by tests to inject specific
    draw outcomes into the engine.
    """

    __slots__ = ("values", "draws")

    def __init__(self, values: Sequence[int]):
        self.values = tuple(values)
        self.draws = 0

    def next_bounded(self, n: int) -> int:
        if self.draws >= len(self.values):
            raise ConfigurationError(
                f"fixed stream exhausted after {len(self.values)} draws"
            )
        value = self.values[self.draws]
        if not 0 <= value < n:
            raise ConfigurationError(
                f"fixed stream value {value} outside [0, {n})"
            )
        self.draws += 1
        return value

    def bounded_block(self, n: int, count: int) -> np.ndarray:
        return np.array([self.next_bounded(n) for _ in range(count)], dtype=np.int64)
