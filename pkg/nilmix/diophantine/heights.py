"""Absolute heights of algebraic numbers and relative heights of vectors."""

import logging
from dataclasses import dataclass
from functools import lru_cache
from math import lcm
from typing import Dict, List, Optional, Sequence

from mpmath import iv

from nilmix.algebra.intervals import decimal_bounds, interval_max, lower, upper, working_precision
from nilmix.algebra.numberfield import NumberField, NumberFieldElement
from nilmix.algebra.polynomials import certified_roots
from nilmix.conf import get_setting
from nilmix.exceptions import FieldMismatch, UnsupportedInput

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HeightValue:
    value: "iv.mpf"
    degree: int

    def __post_init__(self):
        if upper(self.value) < 1:
            raise ValueError("A height is never below 1")

    @property
    def log(self) -> "iv.mpf":
        return iv.ln(self.value)

    def to_json(self) -> Dict:
        lo, hi = decimal_bounds(self.value)
        return {"lower": lo, "upper": hi, "degree": self.degree}


def _at_least_one(value: "iv.mpf") -> "iv.mpf":
    return iv.mpf([max(lower(value), 1), max(upper(value), 1)])


def height(u: NumberFieldElement, precision: Optional[int] = None) -> HeightValue:
    """H(u) = M(p)^{1/deg p} for the primitive minimal polynomial p of u.

    M is the Mahler measure |lead(p)| · ∏ max(1, |root|).
    """
    if u.is_zero:
        raise ValueError("The height of 0 is undefined")
    return _height(u, int(precision or get_setting("PRECISION_BITS")))


@lru_cache(maxsize=2048)
def _height(u: NumberFieldElement, precision: int) -> HeightValue:
    p = u.minpoly()
    roots = certified_roots(p, precision + 8)
    with working_precision(precision + 16):
        log_mahler = iv.ln(iv.mpf(abs(p.leading)))
        for root in roots:
            log_mahler = log_mahler + iv.ln(interval_max(iv.mpf(1), root.modulus()))
        value = _at_least_one(iv.exp(log_mahler / p.degree))
    return HeightValue(value, p.degree)


def _finite_part(entries: Sequence[NumberFieldElement]) -> int:
    """∏ over finite places of max(1, max_i |x_i|_p), read off exact denominators."""
    field = entries[0].field
    if field.degree == 1:
        return lcm(*(x.coords[0].denominator for x in entries))
    fractional = [x for x in entries if not x.is_algebraic_integer()]
    if not fractional:
        return 1
    if len(fractional) > 1:
        # needs the denominator ideal of (1, x_1, ..., x_n)
        raise UnsupportedInput(
            "Finite places of several non-integral entries are not supported",
            {"entries": [x.to_json() for x in fractional]},
        )
    (x,) = fractional
    p = x.minpoly()
    return abs(p.leading) ** (field.degree // p.degree)


def vector_height(
    entries: Sequence[NumberFieldElement], precision: Optional[int] = None
) -> HeightValue:
    """H(x̄) = ∏_v max(1, max_i |x_i|_v) over all places of the common field K.

    Real places use |σ(x)|, complex places |σ(x)|^2, which makes the product
    formula hold. The value is the height relative to K (no 1/[K:Q] root).
    """
    if not entries:
        raise ValueError("vector_height needs at least one entry")
    field: NumberField = entries[0].field
    for x in entries[1:]:
        if x.field != field:
            raise FieldMismatch(f"Entries live in different fields: {field} and {x.field}")
    precision = int(precision or get_setting("PRECISION_BITS"))
    embedded: List = [x.embeddings(precision) for x in entries]
    with working_precision(precision + 16):
        total = iv.mpf(_finite_part(entries))
        for index, is_real in field.places(precision):
            largest = iv.mpf(1)
            for values in embedded:
                largest = interval_max(largest, values[index].modulus())
            total = total * (largest if is_real else largest**2)
        value = _at_least_one(total)
    return HeightValue(value, field.degree)
