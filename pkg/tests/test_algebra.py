import random
from fractions import Fraction
from unittest import mock

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from mpmath import iv, mp

from nilmix.algebra.intervals import (
    CertifiedComplex,
    decimal_bounds,
    lower,
    to_interval,
    upper,
    working_precision,
)
from nilmix.algebra.matrices import UnimodularMatrix, char_poly, rational_rank
from nilmix.algebra.numberfield import NumberField, nf_arith, nf_embeddings, nullspace
from nilmix.algebra.polynomials import (
    IntPolynomial,
    _approximate,
    _inclusion_discs,
    certified_roots,
    chebyshev_transform,
    cyclotomic_order,
    has_root_on_unit_circle,
    roots_of_unity_free,
)
from nilmix.exceptions import FieldMismatch

CAT = UnimodularMatrix(((2, 1), (1, 1)))


def _contains(interval, value) -> bool:
    return lower(interval) <= value <= upper(interval)


class MatrixTests(SimpleTestCase):
    def test_char_poly_examples(self):
        """Characteristic polynomials of the cat map, identity and a companion matrix"""
        self.assertEqual(char_poly(CAT).coeffs, (1, -3, 1))
        self.assertEqual(char_poly(UnimodularMatrix.identity(2)).coeffs, (1, -2, 1))
        companion = UnimodularMatrix(((0, 0, 1), (1, 0, 3), (0, 1, 0)))
        self.assertEqual(char_poly(companion).coeffs, (1, 0, -3, -1))

    def test_companion_constructor(self):
        """companion() builds the matrix whose characteristic polynomial is p"""
        p = IntPolynomial((1, 0, -3, -1))
        self.assertEqual(
            UnimodularMatrix.companion(p).entries, ((0, 0, 1), (1, 0, 3), (0, 1, 0))
        )

    def test_rejects_non_unimodular(self):
        """Determinant other than ±1 is rejected at construction"""
        with self.assertRaises(ValidationError):
            UnimodularMatrix(((2, 0), (0, 1)))
        with self.assertRaises(ValidationError):
            UnimodularMatrix(((1, 2, 3), (4, 5, 6)))

    def test_inverse_and_negative_power(self):
        """A·A^-1 = I and A^-2 inverts A^2"""
        inverse = CAT.inverse()
        self.assertEqual(inverse.entries, ((1, -1), (-1, 2)))
        self.assertTrue((CAT**2 @ CAT ** (-2)).is_identity())
        self.assertEqual((CAT**3).entries, (CAT @ CAT @ CAT).entries)

    def test_transpose_and_apply(self):
        """apply() multiplies a column vector"""
        self.assertEqual(CAT.transpose().apply((1, 0)), (2, 1))
        self.assertEqual(CAT.det, 1)

    def test_rational_rank(self):
        """Exact rank over the rationals"""
        rows = [[Fraction(1, 2), 1], [1, 2], [0, 0]]
        self.assertEqual(rational_rank(rows), 1)
        self.assertEqual(rational_rank([[1, 0], [0, 1]]), 2)


class PolynomialTests(SimpleTestCase):
    def test_sign_normalization(self):
        """Leading coefficient is positive and leading zeros are stripped"""
        self.assertEqual(IntPolynomial((0, -1, 3)).coeffs, (1, -3))
        with self.assertRaises(ValueError):
            IntPolynomial((0, 0))

    def test_roots_of_unity_free(self):
        """Cyclotomic factors are detected exactly"""
        self.assertTrue(roots_of_unity_free(IntPolynomial((1, -3, 1))))
        self.assertFalse(roots_of_unity_free(IntPolynomial((1, -1))))
        self.assertFalse(roots_of_unity_free(IntPolynomial((1, 1, 1))))

    def test_cyclotomic_order(self):
        """Phi_6 = x^2 - x + 1 has order 6"""
        self.assertEqual(cyclotomic_order(IntPolynomial((1, -1, 1))), 6)
        self.assertEqual(cyclotomic_order(IntPolynomial((1, 1))), 2)
        self.assertIsNone(cyclotomic_order(IntPolynomial((1, -3, 1))))

    def test_unit_circle_decision(self):
        """Trace-form substitution locates unit-circle roots"""
        self.assertFalse(has_root_on_unit_circle(IntPolynomial((1, -3, 1))))
        self.assertTrue(has_root_on_unit_circle(IntPolynomial((1, 0, 1))))
        # Salem polynomial: two roots on the circle
        self.assertTrue(has_root_on_unit_circle(IntPolynomial((1, -1, -1, -1, 1))))
        self.assertTrue(has_root_on_unit_circle(IntPolynomial((1, 1))))
        self.assertFalse(has_root_on_unit_circle(IntPolynomial((1, -2))))

    def test_chebyshev_transform(self):
        """x^-2 p(x) written in y = x + 1/x"""
        q = chebyshev_transform(IntPolynomial((1, -1, -1, -1, 1)))
        self.assertEqual([int(c) for c in q.all_coeffs()], [1, -1, -3])


class CertifiedRootTests(SimpleTestCase):
    def test_golden_roots(self):
        """x^2 - 3x + 1 roots enclosed to 1e-9"""
        roots = certified_roots(IntPolynomial((1, -3, 1)), 64)
        self.assertEqual(len(roots), 2)
        self.assertTrue(all(r.radius <= mp.mpf("1e-9") for r in roots))
        self.assertTrue(all(r.real for r in roots))
        self.assertAlmostEqual(float(roots[0].re), 2.6180339887, places=9)
        self.assertAlmostEqual(float(roots[1].re), 0.3819660113, places=9)

    def test_linear_root_is_exact(self):
        """x - 2 has the exact root 2"""
        (root,) = certified_roots(IntPolynomial((1, -2)), 64)
        self.assertTrue(root.is_exact)
        self.assertEqual(root.re, 2)

    def test_imaginary_roots(self):
        """x^2 + 1 roots are ±i, +i first"""
        first, second = certified_roots(IntPolynomial((1, 0, 1)), 64)
        self.assertTrue(first.contains(1j))
        self.assertTrue(second.contains(-1j))
        self.assertTrue(first.disjoint_from(second))

    def test_multiplicity_is_repeated(self):
        """(x - 1)^2 yields two copies of the root 1"""
        roots = certified_roots(IntPolynomial((1, -2, 1)), 64)
        self.assertEqual(len(roots), 2)
        self.assertTrue(all(r.contains(1) for r in roots))

    def test_eigenvalue_product_contains_determinant(self):
        """Product of eigenvalue enclosures has modulus enclosing 1"""
        companion = UnimodularMatrix.companion(IntPolynomial((1, 0, -3, -1)))
        product = CertifiedComplex.exact(1)
        for root in certified_roots(char_poly(companion), 80):
            product = product * root
        self.assertTrue(_contains(product.modulus(), 1))

    def test_roots_rebuild_coefficients(self):
        """Expanding (x - r1)(x - r2)(x - r3) encloses the integer coefficients"""
        p = IntPolynomial((1, 0, -3, -1))
        r1, r2, r3 = certified_roots(p, 80)
        e1 = r1 + r2 + r3
        e2 = r1 * r2 + r1 * r3 + r2 * r3
        e3 = r1 * r2 * r3
        self.assertTrue(_contains(e1.real_interval(), 0))
        self.assertTrue(_contains(e2.real_interval(), -3))
        self.assertTrue(_contains(e3.real_interval(), 1))

    def test_inclusion_radius_rounds_up(self):
        """n·|W| is rounded up where round-to-nearest would round down"""
        p = IntPolynomial((1, 0, 0, -2))
        with working_precision(64):
            # 3·modulus needs 65 bits and lies halfway between two 64-bit neighbours
            modulus = (1 + mp.mpf(2) ** -62 + mp.mpf(2) ** -63) * mp.mpf(2) ** -10
            with mock.patch("nilmix.algebra.polynomials._upper_modulus", return_value=modulus):
                discs = _inclusion_discs(p, _approximate(p, p.real_root_count(), 64), 1)
        self.assertEqual(len(discs), 3)
        with working_precision(256):
            for disc in discs:
                self.assertGreaterEqual(disc.radius, 3 * modulus)


class NumberFieldTests(SimpleTestCase):
    def setUp(self):
        self.field = NumberField(IntPolynomial((1, -3, 1)))
        self.theta = self.field.theta()

    def test_reduction_by_defining_polynomial(self):
        """θ·θ = 3θ - 1"""
        self.assertEqual(nf_arith(self.theta, self.theta, "mul"), self.field.element([-1, 3]))

    def test_inverse(self):
        """inv(θ) = 3 - θ"""
        self.assertEqual(nf_arith(self.theta, None, "inv"), self.field.element([3, -1]))

    def test_add_zero(self):
        """a + 0 = a"""
        self.assertEqual(nf_arith(self.theta, self.field.zero(), "add"), self.theta)

    def test_field_mismatch(self):
        """Mixing fields raises"""
        other = NumberField(IntPolynomial((1, 0, -2))).theta()
        with self.assertRaises(FieldMismatch):
            nf_arith(self.theta, other, "add")

    def test_division_by_zero(self):
        """Zero has no inverse"""
        with self.assertRaises(ZeroDivisionError):
            nf_arith(self.field.zero(), None, "inv")

    def test_random_inverse_roundtrip(self):
        """a·a^-1 = 1 exactly for random nonzero cubic elements"""
        field = NumberField(IntPolynomial((1, 0, -3, -1)))
        rng = random.Random(7)
        checked = 0
        while checked < 100:
            coords = [Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(3)]
            a = field.element(coords)
            if a.is_zero:
                continue
            self.assertEqual(a * a.inverse(), field.one())
            checked += 1

    def test_powers(self):
        """Negative powers invert and minpoly of θ^2 is x^2 - 7x + 1"""
        self.assertEqual(self.theta**-1, self.field.element([3, -1]))
        self.assertEqual((self.theta**2).minpoly().coeffs, (1, -7, 1))
        self.assertEqual(self.theta**0, self.field.one())

    def test_norm_trace_unit(self):
        """θ is a unit of norm 1 and trace 3"""
        self.assertEqual(self.theta.norm(), 1)
        self.assertEqual(self.theta.trace(), 3)
        self.assertTrue(self.theta.is_unit())
        self.assertFalse(self.field.rational(Fraction(1, 2)).is_algebraic_integer())

    def test_embeddings(self):
        """θ embeds as the two golden roots, rationals embed diagonally"""
        hi, lo = nf_embeddings(self.theta, 64)
        self.assertAlmostEqual(float(hi.re), 2.618033988749895, places=12)
        self.assertAlmostEqual(float(lo.re), 0.3819660112501051, places=12)
        two = nf_embeddings(self.field.rational(2), 64)
        self.assertTrue(all(e.contains(2) for e in two))

    def test_gaussian_embeddings(self):
        """θ in Q(i) embeds as i then -i"""
        theta = NumberField(IntPolynomial((1, 0, 1))).theta()
        first, second = nf_embeddings(theta, 64)
        self.assertTrue(first.contains(1j))
        self.assertTrue(second.contains(-1j))

    def test_places(self):
        """Q(i) has one complex place, Q(√5) two real ones"""
        self.assertEqual(NumberField(IntPolynomial((1, 0, 1))).places(), [(0, False)])
        self.assertEqual(self.field.places(), [(0, True), (1, True)])

    def test_nullspace(self):
        """Kernel of [[θ, -1]] is spanned by (1/θ, 1)"""
        basis = nullspace([[self.theta, -self.field.one()]])
        self.assertEqual(len(basis), 1)
        vector = basis[0]
        self.assertTrue((self.theta * vector[0] - vector[1]).is_zero)


class IntervalTests(SimpleTestCase):
    def test_decimal_bounds_round_outward(self):
        """Decimal endpoints bracket the enclosure"""
        lo, hi = decimal_bounds(to_interval(Fraction(1, 3)), digits=5)
        self.assertEqual((lo, hi), ("0.33333", "0.33334"))

    def test_log_modulus(self):
        """log|λ| of the golden square encloses 0.9624236501"""
        root = certified_roots(IntPolynomial((1, -3, 1)), 64)[0]
        value = root.log_modulus()
        self.assertAlmostEqual(float(lower(value)), 0.9624236501192069, places=12)
        self.assertTrue(upper(value) - lower(value) < mp.mpf("1e-9"))

    def test_reciprocal_requires_nonzero(self):
        """Division by an enclosure of 0 is refused"""
        ball = CertifiedComplex.from_intervals(iv.mpf([-1, 1]))
        with self.assertRaises(ZeroDivisionError):
            ball.reciprocal()
