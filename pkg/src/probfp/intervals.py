"""Closed real intervals with outward-rounded float arithmetic.

Every operation returns an interval guaranteed to contain the exact
mathematical image of its operands, at the cost of at most one ulp of
slack per endpoint.  This keeps enclosure soundness independent of the
analyzer's own double-precision roundoff.
"""

from __future__ import annotations

import math
from typing import NamedTuple


class DivisionByZeroInterval(ArithmeticError):
    """Denominator interval contains zero; the quotient is unbounded."""


class Interval(NamedTuple):
    lo: float
    hi: float

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        # stays finite even when lo+hi would overflow
        return self.lo / 2 + self.hi / 2

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi


def _down(x: float) -> float:
    return math.nextafter(x, -math.inf) if math.isfinite(x) else x


def _up(x: float) -> float:
    return math.nextafter(x, math.inf) if math.isfinite(x) else x


def _prod(a: float, b: float) -> float:
    # interval convention: 0 * inf = 0, so a degenerate zero endpoint
    # never injects a spurious infinity
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def add(a: Interval, b: Interval) -> Interval:
    return Interval(_down(a.lo + b.lo), _up(a.hi + b.hi))


def sub(a: Interval, b: Interval) -> Interval:
    return Interval(_down(a.lo - b.hi), _up(a.hi - b.lo))


def mul(a: Interval, b: Interval) -> Interval:
    c = (_prod(a.lo, b.lo), _prod(a.lo, b.hi), _prod(a.hi, b.lo), _prod(a.hi, b.hi))
    return Interval(_down(min(c)), _up(max(c)))


def div(a: Interval, b: Interval) -> Interval:
    if b.lo <= 0.0 <= b.hi:
        raise DivisionByZeroInterval(f"denominator interval [{b.lo}, {b.hi}] contains 0")
    c = (a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi)
    return Interval(_down(min(c)), _up(max(c)))


def neg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo)


def absolute(a: Interval) -> Interval:
    if a.lo >= 0.0:
        return a
    if a.hi <= 0.0:
        return neg(a)
    return Interval(0.0, max(-a.lo, a.hi))


def hull(a: Interval, b: Interval) -> Interval:
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


def intersect(a: Interval, b: Interval) -> Interval | None:
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    return Interval(lo, hi) if lo <= hi else None


def scale(a: Interval, c: float) -> Interval:
    return mul(a, Interval.point(c))


_BINOPS = {"+": add, "-": sub, "*": mul, "/": div}


def binop(op: str, a: Interval, b: Interval) -> Interval:
    try:
        f = _BINOPS[op]
    except KeyError:
        raise ValueError(f"unknown interval operation {op!r}") from None
    return f(a, b)
