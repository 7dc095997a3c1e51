"""Exact number-field arithmetic in a power basis, with certified embeddings.

Elements are stored as rational coordinates in the basis 1, θ, …, θ^{n-1}
(lowest degree first). Multiplication and inversion go through sympy's
``ANP`` type, which keeps results reduced modulo the defining polynomial.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import List, Optional, Sequence, Tuple

from mpmath import mp
from sympy import QQ, Poly
from sympy.polys.matrices import DomainMatrix
from sympy.polys.polyclasses import ANP

from nilmix.algebra.intervals import CertifiedComplex, working_precision
from nilmix.algebra.polynomials import X, IntPolynomial, certified_roots, cyclotomic_order
from nilmix.conf import get_setting
from nilmix.exceptions import FieldMismatch, PrecisionExhausted

logger = logging.getLogger(__name__)


def _fraction(value) -> Fraction:
    return Fraction(int(value.numerator), int(value.denominator))


def _qq(value) -> "QQ":
    value = Fraction(value)
    return QQ(value.numerator, value.denominator)


@dataclass(frozen=True)
class NumberField:
    """Q(θ) for θ a root of a monic irreducible integer polynomial."""

    modulus: IntPolynomial

    def __post_init__(self):
        if not self.modulus.is_monic:
            raise ValueError(f"Defining polynomial {self.modulus} is not monic")
        if not self.modulus.is_irreducible():
            raise ValueError(f"Defining polynomial {self.modulus} is reducible")

    @property
    def degree(self) -> int:
        return self.modulus.degree

    def _mod_list(self) -> List:
        return [QQ.convert(c) for c in self.modulus.coeffs]

    def element(self, coords: Sequence) -> "NumberFieldElement":
        """Element from low-first coordinates; longer vectors are reduced."""
        coords = [Fraction(c) for c in coords] or [Fraction(0)]
        if len(coords) > self.degree:
            poly = Poly([_qq(c) for c in reversed(coords)], X, domain=QQ)
            reduced = poly.rem(Poly(list(self.modulus.coeffs), X, domain=QQ))
            coords = [_fraction(c) for c in reversed(reduced.all_coeffs())]
        coords = coords + [Fraction(0)] * (self.degree - len(coords))
        return NumberFieldElement(self, tuple(coords))

    def rational(self, value) -> "NumberFieldElement":
        return self.element([Fraction(value)])

    def zero(self) -> "NumberFieldElement":
        return self.rational(0)

    def one(self) -> "NumberFieldElement":
        return self.rational(1)

    def theta(self) -> "NumberFieldElement":
        # reduced when the degree is 1
        return self.element([0, 1])

    def roots(self, precision: int) -> List[CertifiedComplex]:
        return certified_roots(self.modulus, precision)

    def places(self, precision: int = 64) -> List[Tuple[int, bool]]:
        """Archimedean places as (embedding index, is_real); complex places use the root with im > 0."""
        result = []
        for index, root in enumerate(self.roots(precision)):
            if root.real:
                result.append((index, True))
            elif root.im > 0:
                result.append((index, False))
        return result

    def __str__(self) -> str:
        return f"Q[x]/({self.modulus})"


@dataclass(frozen=True)
class NumberFieldElement:
    field: NumberField
    coords: Tuple[Fraction, ...]

    def _anp(self) -> ANP:
        return ANP([_qq(c) for c in reversed(self.coords)], self.field._mod_list(), QQ)

    def _from_anp(self, value: ANP) -> "NumberFieldElement":
        return self.field.element([_fraction(c) for c in reversed(value.to_list())])

    def _check_field(self, other: "NumberFieldElement"):
        if other.field != self.field:
            raise FieldMismatch(
                f"Elements live in different fields: {self.field} and {other.field}"
            )

    def _coerce(self, other) -> "NumberFieldElement":
        if isinstance(other, NumberFieldElement):
            self._check_field(other)
            return other
        return self.field.rational(other)

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)

    @property
    def is_rational(self) -> bool:
        return all(c == 0 for c in self.coords[1:])

    def __add__(self, other) -> "NumberFieldElement":
        other = self._coerce(other)
        return NumberFieldElement(self.field, tuple(a + b for a, b in zip(self.coords, other.coords)))

    __radd__ = __add__

    def __neg__(self) -> "NumberFieldElement":
        return NumberFieldElement(self.field, tuple(-c for c in self.coords))

    def __sub__(self, other) -> "NumberFieldElement":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "NumberFieldElement":
        return self._coerce(other) - self

    def __mul__(self, other) -> "NumberFieldElement":
        other = self._coerce(other)
        return self._from_anp(self._anp() * other._anp())

    __rmul__ = __mul__

    def inverse(self) -> "NumberFieldElement":
        if self.is_zero:
            raise ZeroDivisionError("Inverse of zero in a number field")
        return self._from_anp(self.field.one()._anp() / self._anp())

    def __truediv__(self, other) -> "NumberFieldElement":
        return self * self._coerce(other).inverse()

    def __pow__(self, n: int) -> "NumberFieldElement":
        n = int(n)
        base = self if n >= 0 else self.inverse()
        n = abs(n)
        result = self.field.one()
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def multiplication_matrix(self) -> DomainMatrix:
        """Matrix of y ↦ self·y in the power basis (columns are images of θ^j)."""
        n = self.field.degree
        columns = []
        power = self.field.one()
        theta = self.field.theta()
        for _ in range(n):
            columns.append((self * power).coords)
            power = power * theta
        rows = [[_qq(columns[j][i]) for j in range(n)] for i in range(n)]
        return DomainMatrix(rows, (n, n), QQ)

    def charpoly(self) -> List[Fraction]:
        """Monic rational characteristic polynomial of multiplication, highest first."""
        return [_fraction(c) for c in self.multiplication_matrix().charpoly()]

    def minpoly(self) -> IntPolynomial:
        """Primitive integer minimal polynomial."""
        return _minpoly(self)

    def norm(self) -> Fraction:
        coeffs = self.charpoly()
        return (-1) ** self.field.degree * coeffs[-1]

    def trace(self) -> Fraction:
        return -self.charpoly()[1]

    def is_algebraic_integer(self) -> bool:
        return self.minpoly().is_monic

    def is_unit(self) -> bool:
        return self.is_algebraic_integer() and abs(self.norm()) == 1

    def root_of_unity_order(self) -> Optional[int]:
        """Multiplicative order if this element is a root of unity, else None."""
        if self.is_zero:
            return None
        return cyclotomic_order(self.minpoly())

    def embeddings(self, precision: int) -> List[CertifiedComplex]:
        return nf_embeddings(self, precision)

    def to_json(self) -> List[str]:
        return [str(c) for c in self.coords]

    def __str__(self) -> str:
        terms = []
        for i, c in enumerate(self.coords):
            if c == 0:
                continue
            terms.append(str(c) if i == 0 else f"{c}*θ" if i == 1 else f"{c}*θ^{i}")
        return " + ".join(terms) or "0"


@lru_cache(maxsize=1024)
def _minpoly(a: NumberFieldElement) -> IntPolynomial:
    coeffs = a.charpoly()
    scale = lcm(*(c.denominator for c in coeffs))
    charpoly = IntPolynomial(tuple(int(c * scale) for c in coeffs))
    factors = charpoly.factor()
    if len(factors) != 1:
        raise ArithmeticError(f"Characteristic polynomial of {a} is not a prime power")
    return factors[0][0]


def nf_arith(
    a: NumberFieldElement, b: Optional[NumberFieldElement], op: str
) -> NumberFieldElement:
    """Exact field operation; ``op`` is one of add, mul, inv (inv ignores ``b``)."""
    if op == "inv":
        return a.inverse()
    if b is None:
        raise ValueError(f"Operation {op} needs two operands")
    a._check_field(b)
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"Unknown field operation: {op}")


def nf_embeddings(a: NumberFieldElement, precision: int) -> List[CertifiedComplex]:
    """One enclosure per root of the defining polynomial, in certified_roots order."""
    target = mp.mpf(2) ** (-precision)
    cap = get_setting("PRECISION_CAP_BITS")
    bits = precision
    while bits <= cap:
        with working_precision(bits + 16):
            values = [_horner(a.coords, root) for root in a.field.roots(bits)]
            if all(v.radius <= target for v in values):
                return values
        logger.debug("Embedding of %s too wide at %d bits; doubling", a, bits)
        bits *= 2
    raise PrecisionExhausted(
        f"Could not embed {a} to {precision} bits", {"element": a.to_json()}
    )


def _horner(coords: Sequence[Fraction], root: CertifiedComplex) -> CertifiedComplex:
    value = CertifiedComplex.exact(0)
    for c in reversed(coords):
        value = value * root + CertifiedComplex.exact(c)
    return value


def nullspace(rows: Sequence[Sequence[NumberFieldElement]]) -> List[List[NumberFieldElement]]:
    """Basis of {v : M v = 0} for a matrix over one number field, by exact elimination."""
    if not rows:
        return []
    field = rows[0][0].field
    matrix = [list(row) for row in rows]
    n_rows, n_cols = len(matrix), len(matrix[0])
    pivots: List[int] = []
    r = 0
    for c in range(n_cols):
        pivot = next((i for i in range(r, n_rows) if not matrix[i][c].is_zero), None)
        if pivot is None:
            continue
        matrix[r], matrix[pivot] = matrix[pivot], matrix[r]
        inv = matrix[r][c].inverse()
        matrix[r] = [v * inv for v in matrix[r]]
        for i in range(n_rows):
            if i != r and not matrix[i][c].is_zero:
                factor = matrix[i][c]
                matrix[i] = [v - factor * w for v, w in zip(matrix[i], matrix[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    basis = []
    for free in (c for c in range(n_cols) if c not in pivots):
        vector = [field.zero() for _ in range(n_cols)]
        vector[free] = field.one()
        for i, c in enumerate(pivots):
            vector[c] = -matrix[i][free]
        basis.append(vector)
    return basis
