"""Counter-based SplitMix64 streams.

Draw number ``c`` of a stream keyed by ``key`` is
``mix64(key + (c + 1) * GOLDEN)``, the ``c``-th output of a SplitMix64
generator seeded with ``key``. Any draw can be computed without touching
the others, so trials can be split across workers in any way and still
produce identical numbers.

Trial ``t`` of a run seeded with ``seed`` uses
``key = mix64(mix64(seed) + (t + 1) * GOLDEN)``.
"""
from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
_TO_UNIT = 2.0 ** -53


def mix64(z) -> np.ndarray:
    """SplitMix64 finaliser, elementwise on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def draws(keys, counters) -> np.ndarray:
    """Raw 64-bit draws; ``keys`` and ``counters`` broadcast against each other."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(keys + (counters + np.uint64(1)) * GOLDEN)


def uniforms(keys, counters) -> np.ndarray:
    """Doubles in ``[0, 1)`` from the top 53 bits of each draw."""
    return (draws(keys, counters) >> np.uint64(11)).astype(np.float64) * _TO_UNIT


def trial_keys(seed: int, trial_indices) -> np.ndarray:
    """Per-trial stream keys derived from the run seed."""
    root = mix64(np.uint64(int(seed) & _MASK64))
    return draws(root, np.asarray(trial_indices, dtype=np.uint64))


class CounterStream:
    """Sequential view of one stream, for code that steps a single genotype."""

    def __init__(self, key, counter: int = 0):
        self.key = np.uint64(int(key) & _MASK64)
        self.counter = int(counter)

    @classmethod
    def for_trial(cls, seed: int, trial_index: int) -> "CounterStream":
        return cls(trial_keys(seed, [trial_index])[0])

    def uniforms(self, size: int) -> np.ndarray:
        ctr = np.arange(self.counter, self.counter + size, dtype=np.uint64)
        self.counter += size
        return uniforms(self.key, ctr)

    def __repr__(self):
        return f"CounterStream(key={int(self.key):#018x}, counter={self.counter})"
