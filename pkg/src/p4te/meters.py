"""Color-blind token-bucket meters.

Rates are in units per second and bursts in units, where a unit is whatever
the caller charges per packet (a packet slot in pps mode, a byte in byte
mode). Token counts are kept as integers scaled so that refill over an
integer number of nanoseconds is exact; replaying a trace therefore
reproduces the color sequence bit for bit.

Rate and burst configuration is fixed at construction.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm
from numbers import Rational

from .engine import NS_PER_SEC
from .packet import Color

GREEN, YELLOW, RED = Color.GREEN, Color.YELLOW, Color.RED


class MeterConfigError(AttributeError):
    """Raised on any attempt to change a meter's rates after creation."""


def as_fraction(x: float | int | Rational | str) -> Fraction:
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def _readonly(name: str) -> property:
    def get(self):
        return getattr(self, "_" + name)

    def set_(self, value):
        raise MeterConfigError(f"meter {name} is fixed for the meter's lifetime")

    return property(get, set_)


class TrTcmMeter:
    """Two-rate three-color marker (committed + peak bucket)."""

    __slots__ = ("_cir", "_pir", "_cbs", "_pbs", "_scale", "_cir_ns", "_pir_ns",
                 "_cbs_s", "_pbs_s", "tc", "tp", "last_update")

    cir = _readonly("cir")
    pir = _readonly("pir")
    cbs = _readonly("cbs")
    pbs = _readonly("pbs")

    def __init__(self, cir, pir, cbs, pbs, now: int = 0) -> None:
        cir, pir, cbs, pbs = (as_fraction(v) for v in (cir, pir, cbs, pbs))
        if cir <= 0 or pir < cir:
            raise ValueError(f"need 0 < CIR <= PIR, got CIR={cir} PIR={pir}")
        if cbs <= 0 or pbs <= 0:
            raise ValueError("burst sizes must be positive")
        self._cir, self._pir, self._cbs, self._pbs = cir, pir, cbs, pbs
        den = lcm(cir.denominator, pir.denominator, cbs.denominator, pbs.denominator)
        self._scale = den * NS_PER_SEC
        self._cir_ns = int(cir * den)
        self._pir_ns = int(pir * den)
        self._cbs_s = int(cbs * self._scale)
        self._pbs_s = int(pbs * self._scale)
        self.tc = self._cbs_s
        self.tp = self._pbs_s
        self.last_update = now

    def mark(self, now: int, cost: int = 1) -> Color:
        dt = now - self.last_update
        if dt < 0:
            raise ValueError("meter time went backwards")
        if dt:
            tc = self.tc + dt * self._cir_ns
            tp = self.tp + dt * self._pir_ns
            self.tc = tc if tc < self._cbs_s else self._cbs_s
            self.tp = tp if tp < self._pbs_s else self._pbs_s
            self.last_update = now
        c = cost * self._scale
        if self.tp < c:
            return RED
        self.tp -= c
        if self.tc < c:
            return YELLOW
        self.tc -= c
        return GREEN

    @property
    def committed_tokens(self) -> Fraction:
        return Fraction(self.tc, self._scale)

    @property
    def peak_tokens(self) -> Fraction:
        return Fraction(self.tp, self._scale)


class SrTcmMeter:
    """Single-rate two-color meter: GREEN while tokens cover the cost."""

    __slots__ = ("_rate", "_burst", "_scale", "_rate_ns", "_burst_s", "tokens_s", "last_update")

    rate = _readonly("rate")
    burst = _readonly("burst")

    def __init__(self, rate, burst, now: int = 0) -> None:
        rate, burst = as_fraction(rate), as_fraction(burst)
        if rate <= 0 or burst <= 0:
            raise ValueError("rate and burst must be positive")
        self._rate, self._burst = rate, burst
        den = lcm(rate.denominator, burst.denominator)
        self._scale = den * NS_PER_SEC
        self._rate_ns = int(rate * den)
        self._burst_s = int(burst * self._scale)
        self.tokens_s = self._burst_s
        self.last_update = now

    def mark(self, now: int, cost: int = 1) -> Color:
        dt = now - self.last_update
        if dt < 0:
            raise ValueError("meter time went backwards")
        if dt:
            t = self.tokens_s + dt * self._rate_ns
            self.tokens_s = t if t < self._burst_s else self._burst_s
            self.last_update = now
        c = cost * self._scale
        if self.tokens_s >= c:
            self.tokens_s -= c
            return GREEN
        return YELLOW

    @property
    def tokens(self) -> Fraction:
        return Fraction(self.tokens_s, self._scale)


def link_meter(link_rate, cir_frac, pir_frac, burst_frac=Fraction(1, 20), now: int = 0) -> TrTcmMeter:
    """Utilization meter for a link of ``link_rate`` units/s.

    Bursts default to 5% of one second's worth of the link rate.
    """
    rate = as_fraction(link_rate)
    burst = rate * as_fraction(burst_frac)
    return TrTcmMeter(rate * as_fraction(cir_frac), rate * as_fraction(pir_frac), burst, burst, now)
