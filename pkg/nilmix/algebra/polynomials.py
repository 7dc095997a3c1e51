"""Integer polynomials and certified root enclosures."""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

from mpmath import iv, mp
from sympy import ZZ, Poly, Symbol, cyclotomic_poly, totient

from nilmix.algebra.intervals import CertifiedComplex, upper, working_precision
from nilmix.conf import get_setting
from nilmix.exceptions import PrecisionExhausted

logger = logging.getLogger(__name__)

X = Symbol("x")

# extra bits carried while refining roots
GUARD_BITS = 24


@dataclass(frozen=True)
class IntPolynomial:
    """Integer polynomial, coefficients highest degree first, leading coefficient > 0."""

    coeffs: Tuple[int, ...]

    def __post_init__(self):
        coeffs = [int(c) for c in self.coeffs]
        while len(coeffs) > 1 and coeffs[0] == 0:
            coeffs.pop(0)
        if not coeffs or (len(coeffs) == 1 and coeffs[0] == 0):
            raise ValueError("The zero polynomial has no degree")
        if coeffs[0] < 0:
            coeffs = [-c for c in coeffs]
        object.__setattr__(self, "coeffs", tuple(coeffs))

    @classmethod
    def from_poly(cls, poly: Poly) -> "IntPolynomial":
        return cls(tuple(int(c) for c in poly.all_coeffs()))

    @classmethod
    def from_roots(cls, roots: Sequence[int]) -> "IntPolynomial":
        poly = Poly(1, X, domain=ZZ)
        for r in roots:
            poly = poly * Poly([1, -r], X, domain=ZZ)
        return cls.from_poly(poly)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> int:
        return self.coeffs[0]

    @property
    def is_monic(self) -> bool:
        return self.coeffs[0] == 1

    def to_poly(self) -> Poly:
        return Poly(list(self.coeffs), X, domain=ZZ)

    def evaluate(self, value: int) -> int:
        acc = 0
        for c in self.coeffs:
            acc = acc * value + c
        return acc

    def reversed(self) -> "IntPolynomial":
        """x^deg p(1/x), sign-normalized."""
        coeffs = list(reversed(self.coeffs))
        while coeffs and coeffs[0] == 0:
            coeffs.pop(0)
        return IntPolynomial(tuple(coeffs))

    def is_self_reciprocal(self) -> bool:
        rev = tuple(reversed(self.coeffs))
        return rev == self.coeffs or rev == tuple(-c for c in self.coeffs)

    def factor(self) -> List[Tuple["IntPolynomial", int]]:
        """Irreducible factors over Q with multiplicities, in a canonical order."""
        _, factors = self.to_poly().factor_list()
        result = [(IntPolynomial.from_poly(f), m) for f, m in factors if f.degree() > 0]
        return sorted(result, key=lambda fm: (fm[0].degree, fm[0].coeffs, fm[1]))

    def is_irreducible(self) -> bool:
        factors = self.factor()
        return len(factors) == 1 and factors[0][1] == 1

    def gcd(self, other: "IntPolynomial") -> "IntPolynomial":
        return IntPolynomial.from_poly(self.to_poly().gcd(other.to_poly()))

    def real_root_count(self, lo=None, hi=None) -> int:
        return int(self.to_poly().count_roots(lo, hi))

    def __str__(self) -> str:
        return str(self.to_poly().as_expr())

    def to_json(self) -> List[str]:
        return [str(c) for c in self.coeffs]


def cyclotomic(k: int) -> IntPolynomial:
    return IntPolynomial.from_poly(cyclotomic_poly(k, X, polys=True))


def cyclotomic_indices(max_degree: int) -> List[int]:
    """All k with phi(k) <= max_degree (phi(k) >= sqrt(k/2) bounds the search)."""
    bound = 2 * max_degree * max_degree + 2
    return [k for k in range(1, bound + 1) if int(totient(k)) <= max_degree]


def roots_of_unity_free(p: IntPolynomial) -> bool:
    """True iff p shares no root with any cyclotomic polynomial."""
    for k in cyclotomic_indices(p.degree):
        if p.gcd(cyclotomic(k)).degree > 0:
            return False
    return True


def cyclotomic_order(p: IntPolynomial) -> Optional[int]:
    """k with p == Phi_k, or None when p is not cyclotomic."""
    if not p.is_monic:
        return None
    for k in cyclotomic_indices(p.degree):
        if int(totient(k)) == p.degree and cyclotomic(k) == p:
            return k
    return None


def chebyshev_transform(p: IntPolynomial) -> Poly:
    """q with x^{-k} p(x) = q(x + 1/x) for a self-reciprocal p of degree 2k."""
    if p.degree % 2:
        raise ValueError("Only even-degree polynomials have a trace form")
    k = p.degree // 2
    # coefficient of x^(k+j) is coeffs[k - j] when listed highest first
    a = list(reversed(p.coeffs))
    y = Poly(X, X, domain=ZZ)
    t_prev = Poly(2, X, domain=ZZ)
    t_cur = y
    q = Poly(a[k], X, domain=ZZ)
    for j in range(1, k + 1):
        q = q + t_cur * a[k + j]
        t_prev, t_cur = t_cur, y * t_cur - t_prev
    return q


def has_root_on_unit_circle(p: IntPolynomial) -> bool:
    """Exact decision for irreducible p."""
    if p.degree == 1:
        return abs(p.coeffs[1]) == p.coeffs[0]
    reversed_coeffs = tuple(reversed(p.coeffs))
    if reversed_coeffs == tuple(-c for c in p.coeffs):
        # p(1) = -p(1)
        return True
    if reversed_coeffs != p.coeffs or p.degree % 2:
        return False
    q = chebyshev_transform(p)
    return int(q.count_roots(-2, 2)) > 0


def certified_roots(p: IntPolynomial, precision: int) -> List[CertifiedComplex]:
    """Disc enclosures of every root (with multiplicity), radius <= 2^-precision.

    Discs of distinct roots are pairwise disjoint. Sorted by decreasing real
    part, then decreasing imaginary part.
    """
    if p.degree < 1:
        raise ValueError("certified_roots needs a nonconstant polynomial")
    return list(_certified_roots(p, int(precision)))


@lru_cache(maxsize=256)
def _certified_roots(p: IntPolynomial, precision: int) -> Tuple[CertifiedComplex, ...]:
    roots: List[CertifiedComplex] = []
    for factor, multiplicity in p.factor():
        enclosures = _isolate_irreducible(factor, precision)
        for enclosure in enclosures:
            roots.extend([enclosure] * multiplicity)
    roots.sort(key=lambda r: (-r.re, -r.im))
    return tuple(roots)


def _isolate_irreducible(f: IntPolynomial, precision: int) -> List[CertifiedComplex]:
    target = mp.mpf(2) ** (-precision)
    if f.degree == 1:
        a, b = f.coeffs
        with working_precision(precision + GUARD_BITS):
            root = CertifiedComplex.from_intervals(-iv.mpf(b) / a)
        return [root]

    real_count = f.real_root_count()
    cap = get_setting("PRECISION_CAP_BITS")
    bits = max(precision + GUARD_BITS, 64)
    while bits <= cap:
        with working_precision(bits):
            approximations = _approximate(f, real_count, bits)
            if approximations is not None:
                enclosures = _inclusion_discs(f, approximations, real_count)
                if enclosures is not None and all(e.radius <= target for e in enclosures):
                    return enclosures
        logger.debug("Root isolation of %s failed at %d bits; doubling", f, bits)
        bits *= 2
    raise PrecisionExhausted(
        f"Could not isolate the roots of {f} within {cap} bits",
        {"polynomial": f.to_json(), "precision": precision},
    )


def _approximate(f: IntPolynomial, real_count: int, bits: int):
    """Root approximations with exact conjugate symmetry, or None."""
    try:
        approx = mp.polyroots(
            list(f.coeffs), maxsteps=50 + 10 * f.degree, extraprec=bits // 2 + 10
        )
    except mp.NoConvergence:
        return None
    approx = [mp.mpc(z) for z in approx]
    by_imag = sorted(approx, key=lambda z: abs(z.imag))
    reals = [mp.mpc(z.real, 0) for z in by_imag[:real_count]]
    upper_half = [z for z in by_imag[real_count:] if z.imag > 0]
    if 2 * len(upper_half) != f.degree - real_count:
        return None
    pairs = []
    for z in upper_half:
        pairs.extend([z, mp.conj(z)])
    return reals + pairs, real_count


def _inclusion_discs(f: IntPolynomial, approximations, real_count: int):
    """Weierstrass correction discs D(z_i, n|W_i|); None unless pairwise disjoint."""
    points, real_count = approximations
    n = f.degree
    lead = f.coeffs[0]
    balls = [
        CertifiedComplex.exact(z.real) if i < real_count else _point(z)
        for i, z in enumerate(points)
    ]
    discs = []
    for i, z in enumerate(balls):
        value = CertifiedComplex.exact(0)
        for c in f.coeffs:
            value = value * z + CertifiedComplex.exact(c)
        denominator = CertifiedComplex.exact(lead)
        for j, w in enumerate(balls):
            if j != i:
                denominator = denominator * (z - w)
        if not denominator.excludes_zero():
            return None
        correction = value * denominator.reciprocal()
        radius = upper(iv.mpf(n) * iv.mpf(_upper_modulus(correction)))
        disc = CertifiedComplex(z.re, z.im, radius, real=i < real_count)
        discs.append(disc)
    for i in range(n):
        for j in range(i + 1, n):
            if not discs[i].disjoint_from(discs[j]):
                return None
    return discs


def _point(z) -> CertifiedComplex:
    return CertifiedComplex(mp.mpf(z.real), mp.mpf(z.imag), mp.mpf(0))


def _upper_modulus(z: CertifiedComplex):
    return upper(z.modulus())
