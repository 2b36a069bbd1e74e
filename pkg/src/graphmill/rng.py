"""Portable deterministic randomness used everywhere in graphmill.

All shuffling, sampling, and synthetic data derive from splitmix64 so that
results reproduce bit-for-bit across runs, worker counts, and the compiled /
pure-Python kernel pair. The exact recurrences below are the contract; the
compiled kernel reimplements them in C and the test suite checks equality.

splitmix64 step (state advances by the 64-bit golden ratio, output is the
finalizer of the new state):

    state = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    out = z ^ (z >> 31)

Derived stream seeds fold words into a base seed one at a time:

    h = base
    for w in words:
        h = mix64((h ^ w) + 0x9E3779B97F4A7C15 mod 2^64)

Bounded draws use plain modulo (`next_u64() % n`); the bias is below 2^-40
for every n that occurs here (n is a node degree or seed count).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """splitmix64 finalizer of a 64-bit word."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def stream_seed(base: int, *words: int) -> int:
    """Fold `words` into `base`, giving an independent stream seed."""
    h = base & MASK64
    for w in words:
        h = mix64(((h ^ (w & MASK64)) + GOLDEN) & MASK64)
    return h


class SplitMix64:
    """Sequential splitmix64 generator."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        return self.next_u64() % n

    def next_unit(self) -> float:
        # 53 high bits -> [0, 1)
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def shuffle(items: list, stream: SplitMix64) -> None:
    """In-place Fisher-Yates shuffle driven by `stream`."""
    for i in range(len(items) - 1, 0, -1):
        j = stream.next_below(i + 1)
        items[i], items[j] = items[j], items[i]


def mix64_np(x: np.ndarray) -> np.ndarray:
    """Vectorized mix64 over a uint64 array (wraparound semantics)."""
    z = x.astype(np.uint64, copy=True)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def stream_seed_np(base: np.ndarray, *words) -> np.ndarray:
    """Vectorized stream_seed; `base` and each word broadcast together."""
    h = np.asarray(base, dtype=np.uint64)
    for w in words:
        w = np.asarray(w, dtype=np.uint64) if not np.isscalar(w) else np.uint64(w & MASK64)
        h = mix64_np((h ^ w) + np.uint64(GOLDEN))
    return h


def u64_to_unit_np(u: np.ndarray) -> np.ndarray:
    """Map uint64 words to float64 in [0, 1), same mapping as next_unit."""
    return (u >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
