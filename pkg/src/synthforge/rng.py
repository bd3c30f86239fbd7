"""Counter-based random streams for schedule-independent generation.

Every generated artifact is keyed by a (seed, stream) pair so classes,
variants and images can be produced in any order, on any number of
workers, and still come out bit-identical. Streams are backed by the
Philox counter-based generator, which is stable across platforms.
"""
from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def hash64(*values: int) -> int:
    """Mix integers into a single 64-bit key (splitmix64 chain)."""
    h = 0x84222325CBF29CE4
    for v in values:
        h ^= v & _MASK64
        h = _splitmix64(h)
    return h


class RngStream:
    """A deterministic random stream identified by (seed, stream).

    The same (seed, stream) always yields the same draw sequence,
    independent of host platform or thread schedule.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = seed & _MASK64
        self.stream = stream & _MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, *indices: int) -> "RngStream":
        """Derive an independent child stream (per image, per attempt, ...)."""
        return RngStream(hash64(self.seed, self.stream, *indices))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None):
        """Inclusive-range integer draw: values in [low, high]."""
        return self._gen.integers(low, high, size=size, endpoint=True)

    def choice(self, n: int, size=None, p=None):
        return self._gen.choice(n, size=size, p=p)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"
