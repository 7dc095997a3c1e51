"""Exact integer matrices with determinant ±1."""

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

from django.core.exceptions import ValidationError
from sympy import QQ, ZZ
from sympy.polys.matrices import DomainMatrix

from nilmix.algebra.polynomials import IntPolynomial

Rows = Tuple[Tuple[int, ...], ...]


def _domain(rows: Sequence[Sequence[int]]) -> DomainMatrix:
    return DomainMatrix([[ZZ(int(v)) for v in row] for row in rows], (len(rows), len(rows)), ZZ)


def _rows(dm: DomainMatrix) -> Rows:
    return tuple(tuple(int(v) for v in row) for row in dm.to_list())


@dataclass(frozen=True)
class UnimodularMatrix:
    """Square integer matrix with det ±1; rows stored as nested tuples."""

    entries: Rows

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in row) for row in self.entries)
        if not rows or any(len(row) != len(rows) for row in rows):
            raise ValidationError("A unimodular matrix must be square and nonempty")
        object.__setattr__(self, "entries", rows)
        det = int(_domain(rows).det())
        if det not in (1, -1):
            raise ValidationError(f"Determinant is {det}, expected ±1")
        object.__setattr__(self, "_det", det)

    @classmethod
    def identity(cls, dim: int) -> "UnimodularMatrix":
        return cls(tuple(tuple(int(i == j) for j in range(dim)) for i in range(dim)))

    @classmethod
    def companion(cls, poly: IntPolynomial) -> "UnimodularMatrix":
        """Companion matrix of a monic p: ones on the subdiagonal, -p coefficients in the last column."""
        if not poly.is_monic:
            raise ValidationError("Companion matrices need a monic polynomial")
        n = poly.degree
        low_first = list(reversed(poly.coeffs))
        rows = [[0] * n for _ in range(n)]
        for i in range(1, n):
            rows[i][i - 1] = 1
        for i in range(n):
            rows[i][n - 1] = -low_first[i]
        return cls(tuple(tuple(r) for r in rows))

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def det(self) -> int:
        return self._det

    def to_domain(self) -> DomainMatrix:
        return _domain(self.entries)

    def __matmul__(self, other: "UnimodularMatrix") -> "UnimodularMatrix":
        if other.dim != self.dim:
            raise ValidationError("Dimension mismatch in matrix product")
        return UnimodularMatrix(_rows(self.to_domain() * other.to_domain()))

    def transpose(self) -> "UnimodularMatrix":
        return UnimodularMatrix(tuple(zip(*self.entries)))

    def inverse(self) -> "UnimodularMatrix":
        inv = self.to_domain().convert_to(QQ).inv()
        rows = inv.to_list()
        if any(v.denominator != 1 for row in rows for v in row):
            raise ValidationError("Inverse of a unimodular matrix must be integral")
        result = UnimodularMatrix(tuple(tuple(int(v.numerator) for v in row) for row in rows))
        if not (self @ result).is_identity():
            raise ValidationError("A·A^-1 != I")
        return result

    def __pow__(self, n: int) -> "UnimodularMatrix":
        n = int(n)
        base = self if n >= 0 else self.inverse()
        return UnimodularMatrix(_rows(base.to_domain().pow(abs(n))))

    def is_identity(self) -> bool:
        return all(v == int(i == j) for i, row in enumerate(self.entries) for j, v in enumerate(row))

    def commutes_with(self, other: "UnimodularMatrix") -> bool:
        return (self @ other).entries == (other @ self).entries

    def apply(self, vector: Sequence[int]) -> Tuple[int, ...]:
        if len(vector) != self.dim:
            raise ValidationError("Dimension mismatch applying a matrix")
        return tuple(sum(a * int(v) for a, v in zip(row, vector)) for row in self.entries)

    def to_json(self) -> List[List[int]]:
        return [list(row) for row in self.entries]


def char_poly(m: UnimodularMatrix) -> IntPolynomial:
    """Characteristic polynomial det(xI - m), computed fraction-free over ZZ."""
    return IntPolynomial(tuple(int(c) for c in m.to_domain().charpoly()))


def _sparse(rows: Sequence[Sequence], width: int) -> DomainMatrix:
    """Sparse QQ matrix; the compatibility systems have a handful of nonzeros per row."""
    # ints, Fractions and QQ elements all expose numerator/denominator
    entries = {}
    for i, row in enumerate(rows):
        nonzero = {j: QQ(int(v.numerator), int(v.denominator)) for j, v in enumerate(row) if v}
        if nonzero:
            entries[i] = nonzero
    return DomainMatrix(entries, (len(rows), width), QQ)


def rational_rank(rows: Sequence[Sequence]) -> int:
    """Exact rank of a rectangular matrix of rationals (Fraction or QQ)."""
    if not rows:
        return 0
    return _sparse(rows, len(rows[0])).rank()


def rational_nullspace(rows: Sequence[Sequence], width: int) -> List[List[Fraction]]:
    """Basis of {v : M v = 0} read off the reduced row echelon form over QQ."""
    if not rows:
        return [[Fraction(int(i == j)) for j in range(width)] for i in range(width)]
    reduced, pivots = _sparse(rows, width).rref()
    reduced = reduced.to_list()
    basis = []
    for free in (c for c in range(width) if c not in pivots):
        vector = [Fraction(0)] * width
        vector[free] = Fraction(1)
        for i, c in enumerate(pivots):
            value = reduced[i][free]
            vector[c] = -Fraction(int(value.numerator), int(value.denominator))
        basis.append(vector)
    return basis
