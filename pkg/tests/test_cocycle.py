import random
from fractions import Fraction

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from sympy.polys.domains import QQ_I

from nilmix.algebra.matrices import UnimodularMatrix
from nilmix.cocycle import (
    TorusCocycle,
    coboundary,
    coboundary_solve,
    cocycle_validate,
    dual_orbits,
    higher_rank_sum,
    rigidity_pipeline,
    sample_compatible,
    sigma_squared,
    solution_space_check,
    subtract_average,
    telescoping_check,
)
from nilmix.cocycle.cocycles import difference
from nilmix.exceptions import DegenerateInstance
from nilmix.toral import TrigPolynomial, gaussian
from tests.factories import CAT_MATRIX, MINUS_IDENTITY, T3, T3_A, T3_A_AB, T3_AB_B, T3_B


def _random_real(rng: random.Random, dim: int, terms: int, radius: int) -> TrigPolynomial:
    """Random real trigonometric polynomial with rational coefficients."""
    f = TrigPolynomial(dim)
    for _ in range(terms):
        freq = tuple(rng.randint(-radius, radius) for _ in range(dim))
        value = gaussian(Fraction(rng.randint(-4, 4), rng.randint(1, 3)), Fraction(rng.randint(-2, 2), 3))
        negative = tuple(-v for v in freq)
        if freq == negative:
            f = f.add(TrigPolynomial(dim, {freq: gaussian(value.x)}))
        else:
            f = f.add(TrigPolynomial(dim, {freq: value, negative: gaussian(value.x, -value.y)}))
    return f


def _without_mean(f: TrigPolynomial) -> TrigPolynomial:
    coeffs = dict(f.coeffs)
    coeffs.pop((0,) * f.dim, None)
    return TrigPolynomial(f.dim, coeffs)


class DualOrbitTests(SimpleTestCase):
    def test_opposite_frequencies_lie_on_different_orbits(self):
        """±e₁ are on distinct cat-map dual orbits."""
        decomposition = dual_orbits([(1, 0), (-1, 0), (0, 0)], CAT_MATRIX)
        self.assertEqual(len(decomposition.orbits), 2)
        self.assertTrue(decomposition.contains_zero)

    def test_orbit_segments_follow_the_transpose(self):
        """A frequency and its image under aᵀ form one segment."""
        decomposition = dual_orbits([(1, 0), (2, 1)], CAT_MATRIX)
        self.assertEqual(len(decomposition.orbits), 1)
        orbit = decomposition.orbits[0]
        self.assertEqual(orbit.path, ((1, 0), (2, 1)))
        self.assertEqual(orbit.segment, ((1, 0), (2, 1)))

    def test_fixed_frequency_rejected(self):
        """A frequency fixed by the dual map is reported as non-ergodic."""
        shear = UnimodularMatrix(((1, 1), (0, 1)))
        with self.assertRaises(DegenerateInstance):
            dual_orbits([(0, 1)], shear)


class SigmaSquaredTests(SimpleTestCase):
    def test_cosine_on_cat_map(self):
        """2cos(2πx₁) has σ² = 2 by both routes."""
        result = sigma_squared(TrigPolynomial.cosine((1, 0), 2), CAT_MATRIX)
        self.assertEqual(result.value, 2)
        self.assertEqual(result.series, 2)
        self.assertEqual(result.energy, 2)
        self.assertEqual(result.cross_terms, [])
        self.assertEqual(result.orbits, 2)

    def test_zero_function(self):
        """σ²(0) = 0."""
        self.assertEqual(sigma_squared(TrigPolynomial(2), CAT_MATRIX).value, 0)

    def test_coboundary_has_zero_sigma(self):
        """Telescoping makes every orbit sum of φ∘a - φ vanish."""
        rng = random.Random(1)
        for _ in range(10):
            phi = _random_real(rng, 2, 4, 3)
            f = difference(phi.pullback(CAT_MATRIX), phi)
            self.assertEqual(sigma_squared(f, CAT_MATRIX, certify=False).value, 0)

    def test_routes_agree_on_random_functions(self):
        """Series and orbit routes agree exactly and are nonnegative."""
        rng = random.Random(2)
        for _ in range(40):
            f = _without_mean(_random_real(rng, 2, 6, 4))
            result = sigma_squared(f, CAT_MATRIX, certify=False)
            self.assertEqual(result.series, result.orbit_sum)
            self.assertGreaterEqual(result.value, 0)

    def test_routes_agree_on_t3_generators(self):
        """The route identity holds for both generators of the rank-2 action."""
        rng = random.Random(3)
        for matrix in (T3_A, T3_B):
            for _ in range(5):
                f = _without_mean(_random_real(rng, 3, 4, 2))
                result = sigma_squared(f, matrix, certify=False)
                self.assertEqual(result.series, result.orbit_sum)

    def test_preconditions(self):
        """Nonzero means and non-ergodic matrices are rejected."""
        with self.assertRaises(DegenerateInstance):
            sigma_squared(TrigPolynomial.constant(2, 1), CAT_MATRIX)
        with self.assertRaises(DegenerateInstance):
            sigma_squared(TrigPolynomial.cosine((1, 0)), MINUS_IDENTITY.generators[0])


class CoboundarySolveTests(SimpleTestCase):
    def test_recovers_transfer_function(self):
        """φ is recovered up to its mean from φ∘a - φ."""
        rng = random.Random(4)
        for _ in range(30):
            phi = _random_real(rng, 2, 4, 3)
            f = difference(phi.pullback(CAT_MATRIX), phi)
            solution = coboundary_solve(f, CAT_MATRIX, certify=False)
            self.assertTrue(solution.solvable)
            self.assertEqual(solution.phi.coeffs, _without_mean(phi).coeffs)

    def test_cosine_is_obstructed(self):
        """2cos(2πx₁) is obstructed by two orbits with sum 1."""
        solution = coboundary_solve(TrigPolynomial.cosine((1, 0), 2), CAT_MATRIX)
        self.assertIsNone(solution.phi)
        self.assertEqual(
            sorted(o["representative"] for o in solution.obstructions), [[-1, 0], [1, 0]]
        )
        self.assertTrue(all(o["sum"] == ["1", "0"] for o in solution.obstructions))

    def test_zero_function(self):
        """f = 0 gives φ = 0."""
        solution = coboundary_solve(TrigPolynomial(2), CAT_MATRIX)
        self.assertEqual(solution.phi.coeffs, {})

    def test_mean_is_an_obstruction(self):
        """A nonzero mean cannot be a coboundary."""
        solution = coboundary_solve(TrigPolynomial.constant(2, 3), CAT_MATRIX)
        self.assertEqual(solution.obstructions, [{"representative": [0, 0], "sum": ["3", "0"]}])


class CocycleTests(SimpleTestCase):
    def setUp(self):
        self.phi = TrigPolynomial(
            3,
            {
                (1, 0, 0): gaussian(1, 2),
                (-1, 0, 0): gaussian(1, -2),
                (0, 1, -1): gaussian(Fraction(-1, 2)),
                (0, -1, 1): gaussian(Fraction(-1, 2)),
                (0, 0, 0): gaussian(5),
            },
        )
        self.cocycle = coboundary(self.phi, T3_A, T3_B, (Fraction(1, 2), -3))

    def test_coboundary_cocycle_is_valid(self):
        """Coboundaries plus constants satisfy every check."""
        certificate = cocycle_validate(self.cocycle)
        self.assertTrue(certificate.valid, certificate.issues)
        self.assertEqual(certificate.constants, (Fraction(1, 2), Fraction(-3)))
        self.assertTrue(certificate.constants_additive)
        self.assertTrue(certificate.ergodicity["action"].ergodic)

    def test_constant_cocycle(self):
        """Constant generator values form a valid cocycle."""
        constant = TorusCocycle(T3, TrigPolynomial.constant(3, 1), TrigPolynomial.constant(3, 2))
        certificate = cocycle_validate(constant, certify=False)
        self.assertTrue(certificate.valid)
        self.assertEqual(certificate.constants, (Fraction(1), Fraction(2)))
        stripped, constants = subtract_average(constant)
        self.assertEqual(stripped.f_a.coeffs, {})
        self.assertEqual(stripped.f_b.coeffs, {})
        self.assertEqual(constants, (Fraction(1), Fraction(2)))

    def test_incompatible_cocycle_reports_coefficients(self):
        """f_a arbitrary with f_b = 0 violates compatibility."""
        broken = TorusCocycle(T3, TrigPolynomial.cosine((1, 0, 0)), TrigPolynomial(3))
        certificate = cocycle_validate(broken, certify=False)
        self.assertFalse(certificate.valid)
        self.assertIn([1, 0, 0], [m["freq"] for m in certificate.mismatches])
        with self.assertRaises(DegenerateInstance):
            rigidity_pipeline(broken, certify=False)

    def test_complex_values_rejected(self):
        """Cocycles are real-valued."""
        with self.assertRaises(ValidationError):
            TorusCocycle(T3, TrigPolynomial.character((1, 0, 0)), TrigPolynomial(3))

    def test_subtract_average_strips_means(self):
        """Means are removed exactly and returned as the constant part."""
        stripped, constants = subtract_average(self.cocycle)
        self.assertEqual(constants, (Fraction(1, 2), Fraction(-3)))
        self.assertEqual(stripped.f_a.mean(), QQ_I.zero)
        self.assertEqual(stripped.f_b.mean(), QQ_I.zero)

    def test_telescoping_identity(self):
        """The telescoping identity holds coefficient-wise."""
        stripped, _ = subtract_average(self.cocycle)
        for n in range(1, 4):
            for j in range(1, 4):
                self.assertTrue(telescoping_check(stripped, n, j)["holds"], (n, j))

    def test_higher_rank_sum_contains_energy(self):
        """The (0, 0) term of the double sum is ∫f²."""
        stripped, _ = subtract_average(self.cocycle)
        result = higher_rank_sum(stripped.f_a, T3, window=2)
        energy = sigma_squared(stripped.f_a, T3_A, certify=False).energy
        self.assertIn([0, 0, str(energy)], result["terms"])

    def test_pipeline_recovers_coboundary(self):
        """The pipeline recovers the constants and φ up to its mean."""
        report = rigidity_pipeline(self.cocycle)
        self.assertFalse(report.falsified)
        self.assertEqual(report.constants, (Fraction(1, 2), Fraction(-3)))
        self.assertEqual(report.phi.coeffs, _without_mean(self.phi).coeffs)
        self.assertEqual(report.sigma.value, 0)
        self.assertTrue(report.residual_zero)
        self.assertEqual(report.to_json()["constants"], ["1/2", "-3"])

    def test_random_coboundaries_round_trip(self):
        """50 random coboundary cocycles give back their constants and φ exactly."""
        rng = random.Random(9)
        for trial in range(50):
            phi = _random_real(rng, 3, rng.randint(1, 4), rng.randint(1, 2))
            constants = (Fraction(rng.randint(-3, 3)), Fraction(1, rng.randint(1, 5)))
            cocycle = coboundary(phi, T3_A, T3_B, constants)
            report = rigidity_pipeline(cocycle, telescoping=((1, 1),), certify=False)
            self.assertFalse(report.falsified, trial)
            self.assertEqual(report.constants, constants, trial)
            self.assertEqual(report.phi.coeffs, _without_mean(phi).coeffs, trial)


class SolutionSpaceTests(SimpleTestCase):
    def test_window_solutions_are_coboundaries_plus_constants(self):
        """Compatible window cocycles are coboundaries plus the two constants."""
        result = solution_space_check(T3, 1)
        self.assertEqual(result.unknowns, 54)
        self.assertTrue(result.holds, result.to_json())

    def test_solution_space_on_five_supports(self):
        """Dimensions match on two windows and three generating pairs."""
        supports = [(T3, 1), (T3, 2), (T3_AB_B, 1), (T3_AB_B, 2), (T3_A_AB, 1)]
        for action, radius in supports:
            result = solution_space_check(action, radius)
            self.assertEqual(result.unknowns, 2 * (2 * radius + 1) ** 3)
            self.assertTrue(result.holds, result.to_json())

    def test_sampled_compatible_cocycle_is_cohomologous_to_constant(self):
        """A random solution of the compatibility system has σ² = 0 and a transfer function."""
        for seed in range(5):
            cocycle = sample_compatible(T3, 1, seed=seed)
            self.assertTrue(cocycle_validate(cocycle, certify=False).valid)
            report = rigidity_pipeline(cocycle, telescoping=((1, 1),), certify=False)
            self.assertEqual(report.sigma.value, 0)
            self.assertFalse(report.falsified)
