"""Certified real/complex enclosures on top of ``mpmath.iv``.

Reals are ``iv.mpf`` intervals. Complex values are midpoint-radius balls
(:class:`CertifiedComplex`) whose arithmetic goes through interval boxes, so
every radius is an outward-rounded bound.
"""

import math
from contextlib import contextmanager
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterator, Optional, Union

from mpmath import iv, libmp, mp

Real = Union[int, Fraction, "mp.mpf", "iv.mpf"]


@contextmanager
def working_precision(bits: int) -> Iterator[int]:
    """Temporarily set the binary precision of both mpmath contexts."""
    saved_mp, saved_iv = mp.prec, iv.prec
    mp.prec = bits
    iv.prec = bits
    try:
        yield bits
    finally:
        mp.prec = saved_mp
        iv.prec = saved_iv


def to_interval(value) -> "iv.mpf":
    """Enclose an exact or floating value in an interval."""
    if isinstance(value, iv.mpf):
        return value
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, int):
        return iv.mpf(value)
    if isinstance(value, Fraction):
        return iv.mpf(value.numerator) / value.denominator
    if hasattr(value, "numerator") and hasattr(value, "denominator"):
        # sympy QQ elements
        return iv.mpf(int(value.numerator)) / int(value.denominator)
    if isinstance(value, mp.mpf):
        return iv.mpf([value, value])
    if isinstance(value, float):
        return iv.mpf([value, value])
    raise TypeError(f"Cannot enclose {type(value).__name__}")


def lower(x: "iv.mpf") -> "mp.mpf":
    return mp.make_mpf(x._mpi_[0])


def upper(x: "iv.mpf") -> "mp.mpf":
    return mp.make_mpf(x._mpi_[1])


def midpoint(x: "iv.mpf") -> "mp.mpf":
    return (lower(x) + upper(x)) / 2


def width(x: "iv.mpf") -> "mp.mpf":
    return upper(iv.mpf(upper(x)) - lower(x))


def mpf_to_fraction(value: "mp.mpf") -> Fraction:
    """Exact rational value of a finite binary float."""
    p, q = libmp.to_rational(value._mpf_)
    return Fraction(int(p), int(q))


def contains_zero(x: "iv.mpf") -> bool:
    return lower(x) <= 0 <= upper(x)


def certainly_positive(x: "iv.mpf") -> bool:
    return lower(x) > 0


def certainly_less(x: "iv.mpf", y: "iv.mpf") -> bool:
    return upper(x) < lower(y)


def certainly_leq(x: "iv.mpf", y: "iv.mpf") -> bool:
    return upper(x) <= lower(y)


def excludes(x: "iv.mpf", value: Real) -> bool:
    v = to_interval(value)
    return upper(x) < lower(v) or lower(x) > upper(v)


def hull(x: "iv.mpf", y: "iv.mpf") -> "iv.mpf":
    return iv.mpf([min(lower(x), lower(y)), max(upper(x), upper(y))])


def interval_max(x: "iv.mpf", y: "iv.mpf") -> "iv.mpf":
    return iv.mpf([max(lower(x), lower(y)), max(upper(x), upper(y))])


def interval_min(x: "iv.mpf", y: "iv.mpf") -> "iv.mpf":
    return iv.mpf([min(lower(x), lower(y)), min(upper(x), upper(y))])


def interval_abs(x: "iv.mpf") -> "iv.mpf":
    lo, hi = lower(x), upper(x)
    if lo >= 0:
        return x
    if hi <= 0:
        return -x
    return iv.mpf([0, max(-lo, hi)])


def _decimal_of(value: Fraction, places: int, round_up: bool) -> str:
    scaled = value * 10**places
    n = math.ceil(scaled) if round_up else math.floor(scaled)
    return str(Decimal(n).scaleb(-places))


def decimal_bounds(x: "iv.mpf", digits: int = 20) -> tuple:
    """Decimal strings bracketing ``x`` (lower rounded down, upper up)."""
    lo, hi = lower(x), upper(x)
    scale = max(abs(lo), abs(hi))
    magnitude = 0 if scale == 0 else int(mp.floor(mp.log10(scale)))
    places = max(digits - 1 - magnitude, 0)
    return (
        _decimal_of(mpf_to_fraction(lo), places, round_up=False),
        _decimal_of(mpf_to_fraction(hi), places, round_up=True),
    )


@dataclass(frozen=True)
class CertifiedComplex:
    """Closed disc ``{w : |w - (re + i im)| <= radius}``."""

    re: "mp.mpf"
    im: "mp.mpf"
    radius: "mp.mpf"
    # the enclosed value is known to be real (im == 0 and the disc meets R in it)
    real: bool = False

    @classmethod
    def from_intervals(cls, re: "iv.mpf", im: Optional["iv.mpf"] = None):
        real = im is None
        if im is None:
            im = iv.mpf(0)
        re_mid, im_mid = midpoint(re), midpoint(im)
        half_re = max(
            upper(iv.mpf(upper(re)) - re_mid), upper(iv.mpf(re_mid) - lower(re))
        )
        half_im = max(
            upper(iv.mpf(upper(im)) - im_mid), upper(iv.mpf(im_mid) - lower(im))
        )
        radius = upper(iv.sqrt(iv.mpf(half_re) ** 2 + iv.mpf(half_im) ** 2))
        return cls(re_mid, im_mid, radius, real=real)

    @classmethod
    def exact(cls, value: Real, imag: Real = 0):
        if imag == 0:
            return cls.from_intervals(to_interval(value))
        return cls.from_intervals(to_interval(value), to_interval(imag))

    @property
    def is_exact(self) -> bool:
        return self.radius == 0

    def real_interval(self) -> "iv.mpf":
        return iv.mpf(self.re) + iv.mpf([-self.radius, self.radius])

    def imag_interval(self) -> "iv.mpf":
        if self.real:
            return iv.mpf(0)
        return iv.mpf(self.im) + iv.mpf([-self.radius, self.radius])

    def box(self):
        return self.real_interval(), self.imag_interval()

    def __add__(self, other: "CertifiedComplex") -> "CertifiedComplex":
        other = _as_certified(other)
        a, b = self.box()
        c, d = other.box()
        if self.real and other.real:
            return CertifiedComplex.from_intervals(a + c)
        return CertifiedComplex.from_intervals(a + c, b + d)

    def __sub__(self, other: "CertifiedComplex") -> "CertifiedComplex":
        other = _as_certified(other)
        a, b = self.box()
        c, d = other.box()
        if self.real and other.real:
            return CertifiedComplex.from_intervals(a - c)
        return CertifiedComplex.from_intervals(a - c, b - d)

    def __neg__(self) -> "CertifiedComplex":
        return CertifiedComplex(-self.re, -self.im, self.radius, self.real)

    def __mul__(self, other: "CertifiedComplex") -> "CertifiedComplex":
        other = _as_certified(other)
        a, b = self.box()
        c, d = other.box()
        if self.real and other.real:
            return CertifiedComplex.from_intervals(a * c)
        return CertifiedComplex.from_intervals(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __radd__(self, other) -> "CertifiedComplex":
        return self.__add__(other)

    def conjugate(self) -> "CertifiedComplex":
        return CertifiedComplex(self.re, -self.im, self.radius, self.real)

    def modulus_squared(self) -> "iv.mpf":
        a, b = self.box()
        return interval_abs(a) ** 2 + interval_abs(b) ** 2

    def modulus(self) -> "iv.mpf":
        return iv.sqrt(self.modulus_squared())

    def log_modulus(self) -> "iv.mpf":
        m2 = self.modulus_squared()
        if not certainly_positive(m2):
            raise ArithmeticError("log of an enclosure containing 0")
        return iv.ln(m2) / 2

    def reciprocal(self) -> "CertifiedComplex":
        m2 = self.modulus_squared()
        if not certainly_positive(m2):
            raise ZeroDivisionError("enclosure contains 0")
        a, b = self.box()
        if self.real:
            return CertifiedComplex.from_intervals(a / m2)
        return CertifiedComplex.from_intervals(a / m2, -b / m2)

    def argument(self) -> "iv.mpf":
        a, b = self.box()
        if contains_zero(a) and contains_zero(b):
            raise ArithmeticError("argument of an enclosure containing 0")
        return iv.atan2(b, a)

    def contains(self, value: complex) -> bool:
        value = complex(value)
        dist = iv.sqrt(
            interval_abs(iv.mpf(self.re) - value.real) ** 2
            + interval_abs(iv.mpf(self.im) - value.imag) ** 2
        )
        return upper(dist) <= self.radius

    def disjoint_from(self, other: "CertifiedComplex") -> bool:
        gap = iv.sqrt(
            interval_abs(iv.mpf(self.re) - other.re) ** 2
            + interval_abs(iv.mpf(self.im) - other.im) ** 2
        )
        return certainly_less(iv.mpf(self.radius) + other.radius, gap)

    def excludes_zero(self) -> bool:
        return certainly_positive(self.modulus_squared())

    def to_complex(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __str__(self) -> str:
        return f"({mp.nstr(self.re, 12)} + {mp.nstr(self.im, 12)}i) ± {mp.nstr(self.radius, 3)}"


def _as_certified(value) -> CertifiedComplex:
    if isinstance(value, CertifiedComplex):
        return value
    return CertifiedComplex.exact(value)
