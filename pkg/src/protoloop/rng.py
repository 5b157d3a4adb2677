"""SplitMix64 pseudo-random stream.

Every random draw in the synthetic environment goes through this class so
that trajectories are bit-identical across platforms and can be reproduced
by any other implementation: the generator is SplitMix64 (Steele, Lea &
Flood 2014) and all derived distributions use only IEEE-754 add/multiply,
never libm transcendentals.

Derived draws:

* ``random()``: top 53 bits of the next output, times ``2**-53``.
* ``below(n)``: ``next_u64() % n`` (bias is < n / 2**64, irrelevant here).
* ``normal(mu, sd)``: Irwin-Hall, ``mu + sd * (sum of 12 uniforms - 6)``.
* ``sample(k, n)``: partial Fisher-Yates over ``range(n)``.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed (order-sensitive)."""
    state = 0
    for p in parts:
        state = _mix((state + GOLDEN + (p & MASK64)) & MASK64)
    return state


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return _mix(self.state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def normal(self, mu: float, sd: float) -> float:
        acc = 0.0
        for _ in range(12):
            acc += self.random()
        return mu + sd * (acc - 6.0)

    def sample(self, k: int, n: int) -> list[int]:
        """k distinct integers from range(n), in draw order."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def choice(self, seq):
        return seq[self.below(len(seq))]
