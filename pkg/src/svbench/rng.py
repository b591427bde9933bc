"""Deterministic random primitives shared by the generators and the simulator.

Corpora and simulated runs must be byte-identical across platforms and Python
builds, so nothing here touches ``random`` or platform word size. Two pieces:

* ``SplitMix64`` -- a 64-bit generator with an explicit state-advance rule
  (state += 0x9E3779B97F4A7C15 per step, output via the splitmix64 mixer).
* ``derive_seed`` -- collision-resistant substream seeds from string parts,
  via blake2b, so independent streams can be keyed by
  (run seed, model name, problem id, attempt index) and the like.
"""

from __future__ import annotations

import hashlib
from typing import Sequence, TypeVar

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

T = TypeVar("T")


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: object) -> int:
    """Map a tuple of parts to a 64-bit seed, stable across platforms.

    Parts are joined with a unit separator before hashing so ("ab", "c")
    and ("a", "bc") derive different seeds.
    """
    canonical = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(canonical.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def unit_uniform(*parts: object) -> float:
    """One deterministic draw in [0, 1) keyed entirely by the parts."""
    return _mix64(derive_seed(*parts)) / 2.0**64


class SplitMix64:
    """splitmix64: state advances by a fixed odd constant, output is mixed.

    Small and fully specified, which is the point: re-implementing this from
    the constants above reproduces every corpus bit-for-bit.
    """

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _mix64(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) / 2.0**53

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        threshold = (1 << 64) - ((1 << 64) % n)
        while True:
            value = self.next_u64()
            if value < threshold:
                return value % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError("empty randint range")
        return lo + self.randrange(hi - lo + 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise ValueError("choice from empty sequence")
        return items[self.randrange(len(items))]

    def sample(self, items: Sequence[T], k: int) -> list[T]:
        """k distinct items, by partial Fisher-Yates over a copy."""
        if not 0 <= k <= len(items):
            raise ValueError("sample size out of range")
        pool = list(items)
        for i in range(k):
            j = i + self.randrange(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
