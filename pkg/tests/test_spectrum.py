import random

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from nilmix.algebra.intervals import lower, upper
from nilmix.algebra.matrices import UnimodularMatrix
from nilmix.exceptions import DegenerateInstance, UnsupportedInput
from nilmix.spectrum import (
    ZlAction,
    anosov_check,
    ergodicity_certificate,
    galois_orbits,
    lemma21_constant,
    lyapunov_map,
    shape_is_anosov,
    simultaneous_spectrum,
)
from nilmix.spectrum.lyapunov import orbit_log_sum, verify_growth
from tests.factories import CAT, IDENTITY, MINUS_IDENTITY, SALEM, T3, T3_A, T3_B

LOG_LAMBDA = 0.9624236501192069
PRECISION = 64


def _overlap(a, b) -> bool:
    return lower(a) <= upper(b) and lower(b) <= upper(a)


class ActionTests(SimpleTestCase):
    def test_rejects_non_commuting(self):
        """Non-commuting generators fail validation"""
        with self.assertRaises(ValidationError):
            ZlAction(
                (
                    UnimodularMatrix(((1, 1), (0, 1))),
                    UnimodularMatrix(((1, 0), (1, 1))),
                )
            )

    def test_b_is_unimodular(self):
        """A^2 - 2I has determinant -1"""
        self.assertEqual(T3_B.det, -1)
        self.assertEqual((T3_A @ T3_A).entries, ((0, 1, 0), (0, 3, 1), (1, 0, 3)))

    def test_element(self):
        """α(z) multiplies generator powers"""
        self.assertEqual(T3.element((1, 1)).entries, (T3_A @ T3_B).entries)
        self.assertTrue(T3.element((0, 0)).is_identity())


class SpectrumTests(SimpleTestCase):
    def test_cat_map_characters(self):
        """Cat map has two characters with values (3 ± √5)/2"""
        characters = simultaneous_spectrum(CAT, PRECISION)
        self.assertEqual(len(characters), 2)
        moduli = sorted(float(c.embed((1,), PRECISION).re) for c in characters)
        self.assertAlmostEqual(moduli[0], 0.3819660112501051, places=12)
        self.assertAlmostEqual(moduli[1], 2.618033988749895, places=12)

    def test_identity_characters(self):
        """Identity has characters equal to 1 in singleton orbits"""
        characters = simultaneous_spectrum(IDENTITY)
        self.assertEqual(len(characters), 2)
        for character in characters:
            self.assertEqual(character.values[0], character.field.one())
        orbits = galois_orbits(characters)
        self.assertEqual([o.size for o in orbits], [1, 1])

    def test_t3_characters(self):
        """χ(e2) = χ(e1)^2 - 2 for the rank-2 action"""
        characters = simultaneous_spectrum(T3)
        self.assertEqual(len(characters), 3)
        for character in characters:
            u, v = character.values
            self.assertEqual(v, u * u - 2)

    def test_eigenvectors_are_exact(self):
        """A_i v = χ(e_i) v holds in the splitting field"""
        for character in simultaneous_spectrum(T3):
            for generator, u in zip(T3.generators, character.values):
                image = [
                    sum((v * a for a, v in zip(row, character.eigenvector) if a), u.field.zero())
                    for row in generator.entries
                ]
                self.assertEqual(image, [v * u for v in character.eigenvector])

    def test_non_semisimple_rejected(self):
        """A Jordan block is unsupported"""
        with self.assertRaises(UnsupportedInput):
            simultaneous_spectrum(ZlAction((UnimodularMatrix(((1, 1), (0, 1))),)))

    def test_orbit_partition(self):
        """Cat map and T^3 spectra form one orbit each"""
        self.assertEqual([o.size for o in galois_orbits(simultaneous_spectrum(CAT))], [2])
        self.assertEqual([o.size for o in galois_orbits(simultaneous_spectrum(T3))], [3])


class LyapunovTests(SimpleTestCase):
    def setUp(self):
        (self.cat_orbit,) = galois_orbits(simultaneous_spectrum(CAT))
        (self.t3_orbit,) = galois_orbits(simultaneous_spectrum(T3))

    def test_cat_values(self):
        """ℓ(1) = (log λ, -log λ)"""
        first, second = lyapunov_map(self.cat_orbit, (1,), PRECISION)
        self.assertAlmostEqual(float(lower(first)), LOG_LAMBDA, places=12)
        self.assertAlmostEqual(float(lower(second)), -LOG_LAMBDA, places=12)

    def test_zero_vector(self):
        """ℓ(0) = 0 exactly"""
        for value in lyapunov_map(self.t3_orbit, (0, 0), PRECISION):
            self.assertEqual(lower(value), 0)
            self.assertEqual(upper(value), 0)

    def test_orbit_log_sum_is_zero(self):
        """Units have log-norm 0"""
        for z in [(1, 0), (0, 1), (3, -2)]:
            total = orbit_log_sum(self.t3_orbit, z, PRECISION)
            self.assertTrue(lower(total) <= 0 <= upper(total))

    def test_additivity(self):
        """ℓ(z1 + z2) overlaps ℓ(z1) + ℓ(z2)"""
        rng = random.Random(3)
        for _ in range(100):
            z1 = (rng.randint(-20, 20), rng.randint(-20, 20))
            z2 = (rng.randint(-20, 20), rng.randint(-20, 20))
            total = (z1[0] + z2[0], z1[1] + z2[1])
            joint = lyapunov_map(self.t3_orbit, total, PRECISION)
            parts = zip(
                lyapunov_map(self.t3_orbit, z1, PRECISION),
                lyapunov_map(self.t3_orbit, z2, PRECISION),
            )
            for value, (a, b) in zip(joint, parts):
                self.assertTrue(_overlap(value, a + b))

    def test_cat_constant(self):
        """c = log λ to 1e-9"""
        constant = lemma21_constant(self.cat_orbit, PRECISION)
        self.assertLess(abs(float(constant.lower) - LOG_LAMBDA), 1e-9)
        self.assertLess(abs(float(constant.upper) - LOG_LAMBDA), 1e-9)

    def test_identity_constant_degenerate(self):
        """The identity action has c = 0"""
        orbit = galois_orbits(simultaneous_spectrum(IDENTITY))[0]
        with self.assertRaises(DegenerateInstance):
            lemma21_constant(orbit, PRECISION)

    def test_t3_constant_and_growth(self):
        """Rank-2 constant is positive and bounds growth on the 25-ball"""
        constant = lemma21_constant(self.t3_orbit, PRECISION)
        self.assertGreater(constant.lower, 0)
        self.assertLessEqual(constant.lower, constant.upper)
        self.assertEqual(verify_growth(self.t3_orbit, constant, 25, PRECISION), [])
        self.assertAlmostEqual(
            constant.polygon_estimate, float(constant.lower), delta=1e-6
        )


class CertificateTests(SimpleTestCase):
    def test_cat_ergodic(self):
        """Cat map is certified by rank"""
        certificate = ergodicity_certificate(CAT, PRECISION)
        self.assertTrue(certificate.ergodic)
        self.assertEqual(certificate.orbits[0].method, "rank")

    def test_minus_identity_counterexample(self):
        """-I squares to the identity"""
        certificate = ergodicity_certificate(MINUS_IDENTITY, PRECISION)
        self.assertFalse(certificate.ergodic)
        self.assertEqual(certificate.counterexample["z"], [1])
        self.assertEqual(certificate.counterexample["trivial_power"], [2])

    def test_counterexample_encoding(self):
        """α(z) is non-ergodic and α(trivial_power) is the identity on the orbit."""
        counterexample = ergodicity_certificate(MINUS_IDENTITY, PRECISION).counterexample
        self.assertEqual(counterexample["order"], 2)
        self.assertEqual(
            counterexample["trivial_power"], [counterexample["order"] * v for v in counterexample["z"]]
        )
        self.assertFalse(MINUS_IDENTITY.element(counterexample["z"]).is_identity())
        self.assertTrue(MINUS_IDENTITY.element(counterexample["trivial_power"]).is_identity())

    def test_t3_ergodic(self):
        """The rank-2 action is totally ergodic"""
        self.assertTrue(ergodicity_certificate(T3, PRECISION).ergodic)

    def test_anosov_by_enclosure(self):
        """Cat map and α(1,1) on T^3 are Anosov"""
        self.assertTrue(anosov_check(CAT, (1,), PRECISION).anosov)
        result = anosov_check(T3, (1, 1), PRECISION)
        self.assertTrue(result.anosov)
        self.assertEqual(result.method, "enclosure")

    def test_not_anosov(self):
        """-I has eigenvalue -1; a Salem matrix has eigenvalues on the circle"""
        self.assertFalse(anosov_check(MINUS_IDENTITY, (1,), PRECISION).anosov)
        result = anosov_check(SALEM, (1,), PRECISION)
        self.assertFalse(result.anosov)
        self.assertEqual(result.method, "exact")

    def test_shape(self):
        """Cat-map shape (0, 1, 2) has Anosov quotients"""
        ok, failures = shape_is_anosov(CAT, [(0,), (1,), (2,)], PRECISION)
        self.assertTrue(ok)
        self.assertEqual(failures, [])
