"""SplitMix64: the fixed generator behind every nondeterministic choice.

The algorithm is Steele, Lea and Flood's SplitMix64 (the seeding generator of
the xoshiro family).  It is small enough to re-implement bit-for-bit in any
language, which is the point: a seed fully determines a trace.

Uniform integers in ``[0, n)`` use rejection sampling on the raw 64-bit output
so that no index is favoured.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n


def derive_seed(master_seed: int, *indices: int) -> int:
    """Per-run seed as a hash of the master seed and run coordinates."""
    h = mix64((master_seed & MASK64) ^ GOLDEN_GAMMA)
    for i in indices:
        h = mix64((h + GOLDEN_GAMMA + (i & MASK64)) & MASK64)
    return h
