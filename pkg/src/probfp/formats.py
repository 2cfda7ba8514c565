"""Finite-precision number systems: representable values, nearest rounding,
relative/absolute rounding error, and the rounding-interval geometry that the
error-distribution formulas are built on.

All interval endpoints and coefficients are computed in exact rational
arithmetic; the density code downstream depends on these quantities not
losing cancellation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

__all__ = [
    "FloatFormat",
    "FloatValue",
    "RoundingInterval",
    "HALF",
    "SINGLE",
    "DOUBLE",
    "get_format",
    "exact_value",
    "float_value",
    "round_value",
    "err_abs",
    "err_abs_exact",
    "err_rel",
    "err_rel_exact",
    "rounding_interval",
    "c_coeff",
    "t_feasible",
    "enumerate_finite",
]

Real = Union[int, float, Fraction]


@dataclass(frozen=True)
class FloatFormat:
    """A binary format with p fraction bits and exponents in [e_min, e_max].

    Finite nonzero values are (-1)^s * 2^e * (1 + k/2^p); there are no
    subnormals (everything nearer to 0 than half the smallest normal rounds
    to exact 0) and no NaN.
    """

    p: int
    e_min: int
    e_max: int
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError("precision p must be >= 1")
        if self.e_min >= self.e_max:
            raise ValueError("need e_min < e_max")

    @property
    def unit_roundoff(self) -> Fraction:
        # u = 2^-(p+1): max |relative error| away from the extremal intervals
        return Fraction(1, 2 ** (self.p + 1))

    @property
    def u(self) -> float:
        return float(self.unit_roundoff)

    @property
    def max_finite(self) -> Fraction:
        return Fraction(2) ** self.e_max * (2 - Fraction(1, 2**self.p))

    @property
    def min_positive(self) -> Fraction:
        return Fraction(2) ** self.e_min

    @property
    def zero_threshold(self) -> Fraction:
        # reals with |x| below this round to 0 (the boundary itself is a tie)
        return Fraction(2) ** (self.e_min - 1)

    def count_finite_nonzero(self) -> int:
        return 2 * (self.e_max - self.e_min + 1) * 2**self.p


HALF = FloatFormat(10, -14, 15, "half")
SINGLE = FloatFormat(23, -126, 127, "single")
DOUBLE = FloatFormat(52, -1022, 1023, "double")

_PRESETS = {"half": HALF, "single": SINGLE, "double": DOUBLE}

_CUSTOM_RE = re.compile(r"^custom:(-?\d+),(-?\d+),(-?\d+)$")


def get_format(spec: str) -> FloatFormat:
    """Resolve a format name: "half", "single", "double", or "custom:p,emin,emax"."""
    if spec in _PRESETS:
        return _PRESETS[spec]
    m = _CUSTOM_RE.match(spec.replace(" ", ""))
    if not m:
        raise ValueError(f"unknown format {spec!r}; expected a preset or custom:p,emin,emax")
    return FloatFormat(int(m.group(1)), int(m.group(2)), int(m.group(3)))


@dataclass(frozen=True)
class FloatValue:
    """One representable value: finite z(s,e,k), exact zero, or an infinity."""

    kind: str  # "finite" | "zero" | "inf" | "ninf"
    s: int = 0
    e: int = 0
    k: int = 0

    @staticmethod
    def finite(s: int, e: int, k: int) -> "FloatValue":
        return FloatValue("finite", s, e, k)

    @staticmethod
    def zero() -> "FloatValue":
        return FloatValue("zero")

    @staticmethod
    def infinite(sign: int) -> "FloatValue":
        return FloatValue("inf" if sign > 0 else "ninf")

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"


def exact_value(z: FloatValue, fmt: FloatFormat) -> Fraction:
    """Exact rational value of a finite (or zero) representable."""
    if z.kind == "zero":
        return Fraction(0)
    if z.kind != "finite":
        raise ValueError("infinite value has no rational representation")
    mag = Fraction(2) ** z.e * (1 + Fraction(z.k, 2**fmt.p))
    return -mag if z.s else mag


def float_value(z: FloatValue, fmt: FloatFormat) -> float:
    if z.kind == "inf":
        return math.inf
    if z.kind == "ninf":
        return -math.inf
    return float(exact_value(z, fmt))


def _to_fraction(x: Real) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x)  # exact binary expansion of the double


def round_value(x: Real, fmt: FloatFormat) -> FloatValue:
    """Round a real to the nearest representable, ties to even significand.

    Values strictly beyond the largest finite magnitude map to the matching
    infinity; the tie at the zero threshold goes to 0. Exact rational
    comparison throughout, so double inputs are rounded correctly even when
    fmt is close to double precision itself.
    """
    if isinstance(x, float):
        if math.isinf(x):
            return FloatValue.infinite(1 if x > 0 else -1)
        if math.isnan(x):
            raise ValueError("cannot round NaN")
    xf = _to_fraction(x)
    if xf == 0:
        return FloatValue.zero()
    s = 0 if xf > 0 else 1
    a = abs(xf)
    if a > fmt.max_finite:
        return FloatValue.infinite(1 if s == 0 else -1)
    if a <= fmt.zero_threshold:
        # boundary itself is the tie between 0 and 2^e_min; fixed to 0
        # (probability-zero event for continuous inputs)
        return FloatValue.zero()
    # exponent of the leading bit: 2^e <= a < 2^{e+1}
    e = a.numerator.bit_length() - a.denominator.bit_length()
    if Fraction(2) ** e > a:
        e -= 1
    elif Fraction(2) ** (e + 1) <= a:
        e += 1
    if e < fmt.e_min:
        # a in (threshold, 2^e_min): nearest representable is 2^e_min
        return FloatValue.finite(s, fmt.e_min, 0)
    kf = (a / Fraction(2) ** e - 1) * 2**fmt.p  # in [0, 2^p)
    k0 = int(kf)  # floor for nonnegative
    rem = kf - k0
    half = Fraction(1, 2)
    if rem > half or (rem == half and k0 % 2 == 1):
        k0 += 1
    if k0 == 2**fmt.p:
        e += 1
        k0 = 0
    if e > fmt.e_max:
        return FloatValue.infinite(1 if s == 0 else -1)
    return FloatValue.finite(s, e, k0)


def err_abs(x: Real, fmt: FloatFormat) -> float:
    """x - round(x), as a float; +-inf when x rounds to an infinity."""
    z = round_value(x, fmt)
    if z.kind == "inf":
        return -math.inf
    if z.kind == "ninf":
        return math.inf
    return float(_to_fraction(x) - exact_value(z, fmt))


def err_abs_exact(x: Real, fmt: FloatFormat) -> Fraction:
    z = round_value(x, fmt)
    if not (z.is_finite or z.kind == "zero"):
        raise ValueError("absolute error is infinite here")
    return _to_fraction(x) - exact_value(z, fmt)


def err_rel(x: Real, fmt: FloatFormat) -> float:
    """(x - round(x))/x; equals 1 when x rounds to 0, +-inf when it overflows."""
    xf = _to_fraction(x)
    if xf == 0:
        raise ValueError("relative error undefined at x = 0")
    z = round_value(x, fmt)
    if z.kind == "inf":
        return -math.inf
    if z.kind == "ninf":
        return math.inf
    return float((xf - exact_value(z, fmt)) / xf)


def err_rel_exact(x: Real, fmt: FloatFormat) -> Fraction:
    xf = _to_fraction(x)
    if xf == 0:
        raise ValueError("relative error undefined at x = 0")
    z = round_value(x, fmt)
    if not (z.is_finite or z.kind == "zero"):
        raise ValueError("relative error is infinite here")
    return (xf - exact_value(z, fmt)) / xf


@dataclass(frozen=True)
class RoundingInterval:
    """The set of reals rounding to a given representable: [lo, hi]."""

    lo: Fraction
    hi: Fraction
    owner: FloatValue

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo


def _pos_interval(e: int, k: int, fmt: FloatFormat) -> tuple[Fraction, Fraction]:
    p = fmt.p
    two = Fraction(2)
    if k == 0:
        if e == fmt.e_min:
            lo = two ** (e - 1)
        else:
            lo = two ** (e - 1) * (1 + Fraction(2 ** (p + 1) - 1, 2 ** (p + 1)))
    else:
        lo = two**e * (1 + Fraction(2 * k - 1, 2 ** (p + 1)))
    if e == fmt.e_max and k == 2**p - 1:
        hi = two**e * (1 + Fraction(k, 2**p))  # the value itself; beyond is inf
    else:
        hi = two**e * (1 + Fraction(2 * k + 1, 2 ** (p + 1)))
    return lo, hi


def rounding_interval(z: FloatValue, fmt: FloatFormat) -> RoundingInterval:
    """[⌊z⌋, ⌈z⌉] for finite z; negative z mirrors the positive interval."""
    if not z.is_finite:
        raise ValueError("rounding_interval needs a finite representable")
    lo, hi = _pos_interval(z.e, z.k, fmt)
    if z.s:
        lo, hi = -hi, -lo
    return RoundingInterval(lo, hi, z)


def c_coeff(e: int, k: int, fmt: FloatFormat) -> Fraction:
    """Coefficient relating error scale to interval width: u*|z| = C(e,k)*width.

    The two extremal cases are fixed by the identity itself (u*|z| / width);
    elsewhere C(e,0) = 2/3 and C(e,k) = (2^p+k)/2^{p+1}.
    """
    p = fmt.p
    if not (fmt.e_min <= e <= fmt.e_max and 0 <= k < 2**p):
        raise ValueError("(e,k) out of range for format")
    if e == fmt.e_min and k == 0:
        return Fraction(1, 2**p + 1)
    if e == fmt.e_max and k == 2**p - 1:
        return 2 - Fraction(1, 2**p)
    if k == 0:
        return Fraction(2, 3)
    return Fraction(2**p + k, 2 ** (p + 1))


def t_feasible(z: FloatValue, t: Real, fmt: FloatFormat) -> bool:
    """Whether z/(1 - t*u) still lies inside z's rounding interval.

    Closed-form bounds in t; always true for |t| <= 1/2. Requires a
    non-extremal exponent (the extremal intervals are one-sided).
    """
    if not z.is_finite:
        raise ValueError("t_feasible needs a finite representable")
    if z.e in (fmt.e_min, fmt.e_max):
        raise ValueError("t_feasible requires a non-extremal exponent")
    p = fmt.p
    tf = _to_fraction(t)
    q = Fraction(2 ** (p + 1))
    if z.k == 0:
        return -q / (2 ** (p + 2) - 1) <= tf <= q / (q + 1)
    return -q / (q + 2 * z.k - 1) <= tf <= q / (q + 2 * z.k + 1)


def enumerate_finite(
    fmt: FloatFormat,
    lo: Real = None,
    hi: Real = None,
    max_count: int = 1 << 22,
) -> Iterator[FloatValue]:
    """Finite nonzero representables whose rounding interval meets [lo, hi].

    Ascending order. The guard refuses formats too large to enumerate.
    """
    if fmt.count_finite_nonzero() > max_count and (lo is None or hi is None):
        raise ValueError("format too large to enumerate without a window")
    lof = _to_fraction(lo) if lo is not None else -fmt.max_finite
    hif = _to_fraction(hi) if hi is not None else fmt.max_finite
    out_count = 0
    for s in (1, 0):
        e_range = range(fmt.e_max, fmt.e_min - 1, -1) if s else range(fmt.e_min, fmt.e_max + 1)
        for e in e_range:
            # binade magnitude span, widened by the half-ulp skirts
            blo, _ = _pos_interval(e, 0, fmt)
            _, bhi = _pos_interval(e, 2**fmt.p - 1, fmt)
            span_lo, span_hi = (-bhi, -blo) if s else (blo, bhi)
            if span_hi < lof or span_lo > hif:
                continue
            ks: Iterator[int] = range(2**fmt.p - 1, -1, -1) if s else range(2**fmt.p)
            for k in ks:
                ivl_lo, ivl_hi = _pos_interval(e, k, fmt)
                if s:
                    ivl_lo, ivl_hi = -ivl_hi, -ivl_lo
                if ivl_hi < lof or ivl_lo > hif:
                    continue
                out_count += 1
                if out_count > max_count:
                    raise ValueError("enumeration window too large")
                yield FloatValue.finite(s, e, k)
