"""Independent reference models used by the tests.

These are written from the textbook definitions with exact rational
arithmetic and share no code with the package under test.
"""

from __future__ import annotations

from fractions import Fraction

G, Y, R = 0, 1, 2


class TokenBucketOracle:
    """Color-blind two-rate three-color marker over exact rationals (seconds)."""

    def __init__(self, cir, pir, cbs, pbs):
        self.cir, self.pir = Fraction(cir), Fraction(pir)
        self.cbs, self.pbs = Fraction(cbs), Fraction(pbs)
        self.tc, self.tp = self.cbs, self.pbs
        self.t = Fraction(0)

    def mark(self, t_ns: int, size) -> int:
        t = Fraction(t_ns, 10**9)
        dt = t - self.t
        self.t = t
        self.tc = min(self.cbs, self.tc + self.cir * dt)
        self.tp = min(self.pbs, self.tp + self.pir * dt)
        if self.tp < size:
            return R
        if self.tc < size:
            self.tp -= size
            return Y
        self.tp -= size
        self.tc -= size
        return G


class SingleBucketOracle:
    def __init__(self, rate, burst):
        self.rate, self.burst = Fraction(rate), Fraction(burst)
        self.tokens = self.burst
        self.t = Fraction(0)

    def mark(self, t_ns: int, size) -> int:
        t = Fraction(t_ns, 10**9)
        self.tokens = min(self.burst, self.tokens + self.rate * (t - self.t))
        self.t = t
        if self.tokens >= size:
            self.tokens -= size
            return G
        return Y


def chi2_uniform(counts) -> float:
    """Pearson statistic against a uniform expectation."""
    n = sum(counts)
    e = n / len(counts)
    return sum((c - e) ** 2 / e for c in counts)
