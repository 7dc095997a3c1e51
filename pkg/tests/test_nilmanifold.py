import random
from fractions import Fraction

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from nilmix.algebra.matrices import UnimodularMatrix
from nilmix.algebra.numberfield import NumberField
from nilmix.algebra.polynomials import IntPolynomial
from nilmix.exceptions import DegenerateInstance, UnsupportedInput
from nilmix.nilmanifold import (
    BaseCharacter,
    BoxMap,
    Bump,
    Constant,
    HeisAction,
    HeisAuto,
    HeisPoint,
    Projection,
    boxmap_equidistribution_test,
    boxmap_obstruction_search,
    character_equidistribution_test,
    dichotomy_check,
    dichotomy_suite,
    function_from_json,
    heis_auto_apply,
    heis_inverse,
    heis_mul,
    heis_reduce,
    mc_correlation,
)
from nilmix.nilmanifold.heisenberg import IDENTITY
from tests.factories import CAT_MATRIX

SQRT2 = 1.4142135623730951


def _random_point(rng: random.Random) -> HeisPoint:
    return HeisPoint(*(Fraction(rng.randint(-20, 20), rng.randint(1, 7)) for _ in range(3)))


def _random_lattice(rng: random.Random) -> HeisPoint:
    return HeisPoint(*(rng.randint(-5, 5) for _ in range(3)))


class HeisenbergGroupTests(SimpleTestCase):
    def test_noncommutativity_witness(self):
        """The generators of the lattice do not commute."""
        self.assertEqual(heis_mul(HeisPoint(1, 0, 0), HeisPoint(0, 1, 0)), HeisPoint(1, 1, 1))
        self.assertEqual(heis_mul(HeisPoint(0, 1, 0), HeisPoint(1, 0, 0)), HeisPoint(1, 1, 0))

    def test_group_axioms_on_rationals(self):
        """Identity, inverses and associativity hold exactly."""
        rng = random.Random(3)
        for _ in range(200):
            p, q, r = (_random_point(rng) for _ in range(3))
            self.assertEqual(heis_mul(IDENTITY, p), p)
            self.assertEqual(heis_mul(p, heis_inverse(p)), IDENTITY)
            self.assertEqual(heis_mul(heis_mul(p, q), r), heis_mul(p, heis_mul(q, r)))

    def test_reduce_examples(self):
        """Reduction fixes the fundamental domain and follows the y, x, z order."""
        inside = HeisPoint.parse(["0.25", "0.5", "0.75"])
        self.assertEqual(heis_reduce(inside), (inside, HeisPoint(0, 0, 0)))
        r, lam = heis_reduce(HeisPoint.parse(["1.25", "-0.5", "2.3"]))
        self.assertEqual(r, HeisPoint(Fraction(1, 4), Fraction(1, 2), Fraction(11, 20)))
        self.assertEqual(lam, HeisPoint(1, -1, 2))
        self.assertEqual(heis_mul(r, lam), HeisPoint.parse(["1.25", "-0.5", "2.3"]))
        self.assertEqual(heis_reduce(HeisPoint(2, 3, -1))[0], HeisPoint(0, 0, 0))

    def test_reduce_is_constant_on_cosets(self):
        """reduce(p·λ) equals reduce(p) for lattice elements λ."""
        rng = random.Random(11)
        for _ in range(200):
            p = _random_point(rng)
            lam = _random_lattice(rng)
            self.assertEqual(heis_reduce(heis_mul(p, lam))[0], heis_reduce(p)[0])


class HeisAutoTests(SimpleTestCase):
    def setUp(self):
        self.cat = HeisAuto(CAT_MATRIX)

    def test_cat_block_moves_generator(self):
        """The cat automorphism sends (1,0,0) to (2,1,1)."""
        self.assertEqual(self.cat.kappa_linear, (Fraction(0), Fraction(-1, 2)))
        self.assertEqual(heis_auto_apply(self.cat, HeisPoint(1, 0, 0)), HeisPoint(2, 1, 1))
        self.assertTrue(self.cat.preserves_lattice())

    def test_identity_fixes_points(self):
        """The identity automorphism fixes every point."""
        p = HeisPoint(Fraction(1, 3), Fraction(-2, 5), Fraction(7, 4))
        self.assertEqual(HeisAuto.identity().apply(p), p)

    def test_homomorphism_property(self):
        """β(p·q) = β(p)·β(q) exactly."""
        p, q = HeisPoint(1, 0, 0), HeisPoint(0, 1, 0)
        self.assertEqual(self.cat.apply(heis_mul(p, q)), heis_mul(self.cat.apply(p), self.cat.apply(q)))
        rng = random.Random(5)
        for _ in range(100):
            p, q = _random_point(rng), _random_point(rng)
            self.assertEqual(
                self.cat.apply(heis_mul(p, q)), heis_mul(self.cat.apply(p), self.cat.apply(q))
            )

    def test_composition_and_inverse(self):
        """Composed and inverted automorphisms act as the composed maps."""
        other = HeisAuto(UnimodularMatrix(((1, 1), (0, 1))))
        composed = self.cat.compose(other)
        inverse = self.cat.inverse()
        rng = random.Random(7)
        for _ in range(50):
            p = _random_point(rng)
            self.assertEqual(composed.apply(p), self.cat.apply(other.apply(p)))
            self.assertEqual(inverse.apply(self.cat.apply(p)), p)
        self.assertEqual(self.cat.compose(inverse), HeisAuto.identity())

    def test_non_integral_kappa_rejected(self):
        """A correction that is not integral on the lattice is rejected."""
        with self.assertRaises(ValidationError):
            HeisAuto(CAT_MATRIX, (0, 0))
        with self.assertRaises(ValidationError):
            HeisAuto(UnimodularMatrix(((0, 1), (1, 0))))

    def test_action_elements_and_words(self):
        """Elements of a commuting action agree with their step-by-step words."""
        action = HeisAction((self.cat, self.cat**2), ("a", "b"))
        self.assertEqual(action.base_action().rank, 2)
        element = action.element((1, -1))
        self.assertEqual(element, self.cat.inverse())
        p = HeisPoint(Fraction(1, 2), Fraction(1, 3), 0)
        q = p
        for step in action.word((1, -1)):
            q = step.apply(q)
        self.assertEqual(q, element.apply(p))


class BumpTests(SimpleTestCase):
    def test_bump_touching_boundary_rejected(self):
        """Bumps must be supported inside the open fundamental domain."""
        with self.assertRaises(ValidationError):
            Bump((0.1, 0.5, 0.5), 0.2)
        with self.assertRaises(ValidationError):
            Bump((0.5, 0.5, 0.5), 0.2, exponent=2)

    def test_function_from_json(self):
        """Observables are read from their JSON forms."""
        bump = function_from_json({"bump": {"center": [0.5, 0.5, 0.5], "radius": 0.2}})
        self.assertEqual(bump, Bump((0.5, 0.5, 0.5), 0.2))
        self.assertEqual(function_from_json({"constant": 2}).integral(), 2.0)
        self.assertEqual(function_from_json({"character": {"freq": [1, -2]}}).freq, (1, -2))
        with self.assertRaises(ValidationError):
            function_from_json({"gaussian": {}})

    def test_centered_bump_has_zero_mean(self):
        """Centering subtracts the exact integral."""
        raw = Bump((0.5, 0.5, 0.5), 0.2)
        centered = Bump((0.5, 0.5, 0.5), 0.2, centered=True)
        self.assertEqual(centered.integral(), 0.0)
        self.assertAlmostEqual(centered.square_integral(), raw.square_integral() - raw.integral() ** 2)


class MonteCarloTests(SimpleTestCase):
    def setUp(self):
        self.cat = HeisAuto(CAT_MATRIX)
        self.identity = HeisAuto.identity()

    def test_constants_give_one(self):
        """Constant functions have correlation exactly 1."""
        result = mc_correlation([Constant(1.0), Constant(1.0)], [self.identity, self.cat], 5000, seed=1)
        self.assertEqual(result.estimate, 1.0)
        self.assertEqual(result.stderr, 0.0)

    def test_self_correlation_matches_square_integral(self):
        """With z₁ = 0 the correlation of a zero-mean bump is its L² norm squared."""
        f = Bump((0.5, 0.5, 0.5), 0.3, centered=True)
        result = mc_correlation([f, f], [self.identity, self.identity], 40000, seed=2)
        self.assertGreater(f.square_integral(), 0)
        self.assertTrue(result.within(f.square_integral(), 5.0))

    def test_automorphism_preserves_haar(self):
        """∫ f∘β matches ∫ f for several bumps."""
        bumps = [
            Bump((0.5, 0.5, 0.5), 0.3),
            Bump((0.3, 0.6, 0.4), 0.2, exponent=4),
            Bump((0.7, 0.3, 0.5), 0.25, amplitude=2.0),
            Bump((0.4, 0.4, 0.7), 0.15),
            Bump((0.6, 0.5, 0.3), 0.2, exponent=5),
        ]
        for index, f in enumerate(bumps):
            result = mc_correlation([f], [self.cat], 40000, seed=10 + index)
            self.assertTrue(result.within(f.integral(), 5.0), (f, result))

    def test_seed_determinism_across_jobs(self):
        """Estimates depend on the seed only, not on the worker count."""
        f = Bump((0.5, 0.5, 0.5), 0.3, centered=True)
        args = ([f, f], [self.identity, (self.cat, self.cat)], 5000)
        one = mc_correlation(*args, seed=4, jobs=1, chunk_size=1000)
        three = mc_correlation(*args, seed=4, jobs=3, chunk_size=1000)
        other = mc_correlation(*args, seed=5, jobs=1, chunk_size=1000)
        self.assertEqual(one.estimate, three.estimate)
        self.assertEqual(one.stderr, three.stderr)
        self.assertNotEqual(one.estimate, other.estimate)

    def test_too_few_samples_rejected(self):
        """Estimates need at least a thousand samples."""
        with self.assertRaises(ValueError):
            mc_correlation([Constant(1.0)], [self.identity], 10)


class BoxMapTests(SimpleTestCase):
    def _line(self, slope: float, side: float) -> BoxMap:
        return BoxMap((0, 0, 0), ((1, slope, 0),), (side,))

    def test_box_map_validation(self):
        """Directions must be independent and sides positive."""
        with self.assertRaises(ValidationError):
            BoxMap((0, 0, 0), ((1, 0, 0), (2, 0, 0)), (1, 1))
        with self.assertRaises(ValidationError):
            BoxMap((0, 0, 0), ((1, 0, 0),), (0,))
        box = BoxMap.from_json({"base": [0, 0, 0], "directions": [["1", "1/2", 0]], "sides": [10]})
        self.assertEqual(box.directions, ((1.0, 0.5, 0.0),))
        self.assertEqual(box.volume, 10.0)

    def test_rational_direction_obstruction(self):
        """A rational direction is annihilated by (1, -2)."""
        result = boxmap_obstruction_search(self._line(0.5, 1000), "0.1")
        self.assertEqual(result.z, [1, -2])
        self.assertFalse(result.partial)

    def test_sqrt2_direction_has_no_obstruction(self):
        """No z in the ball of radius 10 beats 7 - 5√2 against 1/100."""
        result = boxmap_obstruction_search(self._line(SQRT2, 1000), "0.1")
        self.assertIsNone(result.z)
        self.assertEqual(result.radius, 10)
        self.assertEqual(result.bounds, [Fraction(1, 100)])
        self.assertEqual(result.best["z"], [7, -5])
        self.assertEqual(boxmap_obstruction_search(self._line(SQRT2, 1000), "0.2").z, None)

    def test_certified_algebraic_projection(self):
        """Exact √2 directions are decided with certified enclosures."""
        field = NumberField(IntPolynomial((1, 0, -2)))
        embedding = next(i for i, root in enumerate(field.roots(64)) if root.re > 0)
        projection = Projection.from_json(
            {"field": [1, 0, -2], "embedding": embedding, "vectors": [[["1"], ["0", "1"]]]}
        )
        box = self._line(SQRT2, 1000)
        self.assertIsNone(boxmap_obstruction_search(box, "0.1", projection).z)
        short = self._line(SQRT2, 10)
        self.assertEqual(boxmap_obstruction_search(short, "0.1", projection).z, [1, -1])

    def test_budget_gives_partial_search(self):
        """A small enumeration budget shrinks the ball and flags the result."""
        result = boxmap_obstruction_search(self._line(0.5, 1000), "0.1", budget=10)
        self.assertTrue(result.partial)
        self.assertEqual(result.searched_radius, 1)
        self.assertIsNone(result.z)

    def test_search_preconditions(self):
        """δ outside (0, δ₀) and d > 4 are rejected."""
        with self.assertRaises(DegenerateInstance):
            boxmap_obstruction_search(self._line(0.5, 10), "0.6")
        with self.assertRaises(UnsupportedInput):
            boxmap_obstruction_search(self._line(0.5, 10), "0.1", Projection.rational([[1, 0, 0, 0, 0]]))

    def test_constant_function_has_no_discrepancy(self):
        """A constant averages to its integral along any box."""
        result = boxmap_equidistribution_test(self._line(SQRT2, 100), Constant(1.0), "0.1", 2000, seed=3)
        self.assertEqual(result.discrepancy, 0.0)
        self.assertTrue(result.passed)
        self.assertEqual(len(result.trials), 3)

    def test_irrational_box_equidistributes(self):
        """The long √2 line pairs no obstruction with a passing test."""
        result = dichotomy_check(self._line(SQRT2, 1000), "0.1", samples=4000, seed=6)
        self.assertEqual(result.label, "equidistributed")
        self.assertEqual(result.paired_freq, [7, -5])
        self.assertFalse(result.falsified)
        self.assertLess(result.equidistribution.threshold, 1.0)
        self.assertLess(result.equidistribution.discrepancy, 0.1)

    def test_rational_box_fails_on_its_character(self):
        """A box on a level set of e(x - 2y) fails and pairs with the obstruction."""
        result = dichotomy_check(
            self._line(0.5, 1000),
            "0.01",
            samples=2000,
            seed=8,
            u_list=[[0, 0, 0]],
            g_list=[[0, 0, 0]],
        )
        self.assertEqual(result.label, "obstruction")
        self.assertEqual(result.paired_freq, [1, -2])
        self.assertFalse(result.equidistribution.passed)
        self.assertAlmostEqual(result.equidistribution.discrepancy, 1.0, places=6)

    def test_one_third_slope_resolves_to_obstruction(self):
        """The slope-1/3 line lies on level sets of e(x - 3y) for every u and g."""
        result = dichotomy_check(self._line(1 / 3, 1000), "0.1", samples=2000, seed=4)
        self.assertEqual(result.label, "obstruction")
        self.assertEqual(result.obstruction.z, [1, -3])
        self.assertFalse(result.equidistribution.passed)
        for trial in result.equidistribution.trials:
            self.assertAlmostEqual(trial["discrepancy"], 1.0, places=6)
            self.assertLess(trial["threshold"], 0.2)

    def test_character_test_uses_sup_norm_threshold(self):
        """Thresholds stay at δ + 3·stderr whatever the frequency."""
        result = character_equidistribution_test(self._line(SQRT2, 1000), (17, -12), "0.05", 2000, seed=2)
        self.assertTrue(result.passed)
        self.assertEqual(result.integral, 0.0)
        for trial in result.trials:
            self.assertAlmostEqual(trial["threshold"], 0.05 + 3 * trial["stderr"])
            self.assertEqual(len(trial["average"]), 2)

    def test_generated_suite_resolves_to_one_branch(self):
        """50 quadratic-field lines equidistribute and 10 rational lines are obstructed at δ = 1/20."""
        suite = dichotomy_suite(50, 10, seed=5)
        self.assertEqual([s.family for s in suite].count("algebraic"), 50)
        for instance in suite:
            result = dichotomy_check(
                instance.boxmap, "0.05", instance.projection, samples=1000, seed=5, trials=2
            )
            self.assertNotIn(result.label, ("both", "neither"))
            if instance.family == "rational":
                self.assertEqual(result.label, "obstruction")
                self.assertTrue(instance.projection.pairing(result.obstruction.z, 0).is_zero)
            else:
                self.assertEqual(result.label, "equidistributed")
                self.assertIsNone(result.obstruction.z)

    def test_suite_is_seeded(self):
        """The same seed generates the same box maps."""
        first, second = dichotomy_suite(3, 2, seed=9), dichotomy_suite(3, 2, seed=9)
        self.assertEqual([s.boxmap for s in first], [s.boxmap for s in second])
        self.assertNotEqual([s.boxmap for s in first], [s.boxmap for s in dichotomy_suite(3, 2, seed=10)])

    def test_character_test_function(self):
        """Base characters integrate to zero and scale with their frequency."""
        character = BaseCharacter((1, -2))
        self.assertEqual(character.integral(), 0.0)
        self.assertGreater(character.holder_scale(), 1.0)
        sine = BaseCharacter((1, -2), phase=0.25)
        self.assertAlmostEqual(float(sine.evaluate([[0.125, 0, 0]])[0]), 2 ** -0.5)
