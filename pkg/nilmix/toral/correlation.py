"""Exact multi-correlations on T^d and the separation statistics of a shape.

For trigonometric polynomials the integral ∫ ∏_i f_i(α(z_i)x) dx is the sum
of ∏_i c_i(a_i) over the frequency tuples with Σ_i α(z_i)ᵀ a_i = 0, so it is
computed exactly by matching lattice sums.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Any, Dict, List, Optional, Sequence, Tuple

from mpmath import iv, mp
from sympy.polys.domains import QQ_I

from nilmix.algebra.intervals import (
    decimal_bounds,
    interval_abs,
    interval_max,
    interval_min,
    lower,
    to_interval,
    upper,
    working_precision,
)
from nilmix.conf import get_setting
from nilmix.exceptions import BudgetExceeded, DegenerateInstance
from nilmix.spectrum.action import ActionValidator, ZlAction
from nilmix.spectrum.certificates import shape_is_anosov
from nilmix.spectrum.characters import galois_orbits, simultaneous_spectrum
from nilmix.spectrum.lyapunov import LyapunovConstant, lemma21_constant, lyapunov_map
from nilmix.toral.trig import TrigPolynomial, to_fraction

logger = logging.getLogger(__name__)

# how the N_* display "min_χ min_{|χ(z_i - z_j)| >= 1}" is read
N_STAR_PARSE = "global_min_over_restricted"

Partial = Dict[Tuple[int, ...], Tuple[Any, int]]


def _fmt(value: "iv.mpf") -> List[str]:
    return list(decimal_bounds(value))


@dataclass
class OrbitSeparation:
    factor: List[str]
    log_n_orbit: "iv.mpf"
    constant: Optional[LyapunovConstant] = None
    # log N_orbit >= c · log N, None when the orbit has no positive constant
    holds: Optional[bool] = None

    def to_json(self) -> Dict[str, Any]:
        return {
            "factor": self.factor,
            "log_n_orbit": _fmt(self.log_n_orbit),
            "constant": None
            if self.constant is None
            else [mp.nstr(self.constant.lower, 15), mp.nstr(self.constant.upper, 15)],
            "holds": self.holds,
        }


@dataclass
class SeparationStats:
    log_n: int
    log_n_star: "iv.mpf"
    log_n_star_bang: "iv.mpf"
    n_star_defined: bool
    orbits: List[OrbitSeparation] = field(default_factory=list)

    def to_json(self) -> Dict[str, Any]:
        with working_precision(64):
            n_star = iv.exp(self.log_n_star)
            n_star_bang = iv.exp(self.log_n_star_bang)
            n = iv.exp(to_interval(self.log_n))
        return {
            "N": {"log": self.log_n, "value": _fmt(n)},
            "N_star": {"log": _fmt(self.log_n_star), "value": _fmt(n_star)},
            "N_star_bang": {"log": _fmt(self.log_n_star_bang), "value": _fmt(n_star_bang)},
            "n_star_defined": self.n_star_defined,
            "n_star_parse": N_STAR_PARSE,
            "orbits": [orbit.to_json() for orbit in self.orbits],
        }


@dataclass
class CorrelationResult:
    """Exact value of the polynomial part plus a certified radius for the tails."""

    value: Any
    radius: "mp.mpf"
    matched_tuples: int
    separation: Optional[SeparationStats] = None

    @property
    def is_exact(self) -> bool:
        return self.radius == 0

    @property
    def re(self):
        return to_fraction(self.value.x)

    @property
    def im(self):
        return to_fraction(self.value.y)

    def to_json(self) -> Dict[str, Any]:
        return {
            "re": str(self.re),
            "im": str(self.im),
            "radius": mp.nstr(self.radius, 20) if self.radius else "0",
            "exact": self.is_exact,
            "matched_tuples": self.matched_tuples,
            "separation": None if self.separation is None else self.separation.to_json(),
        }


def _transformed(
    f_list: Sequence[TrigPolynomial], z_list: Sequence[Sequence[int]], action: ZlAction
) -> List[TrigPolynomial]:
    if len(f_list) < 2:
        raise ValueError("A multi-correlation needs at least two functions")
    if len(f_list) != len(z_list):
        raise ValueError(f"{len(f_list)} functions but {len(z_list)} shape vectors")
    for index, f in enumerate(f_list):
        if f.dim != action.dim:
            raise ValueError(f"f[{index}] lives on T^{f.dim}, the action on T^{action.dim}")
    return [f.pullback(action.element(z)) for f, z in zip(f_list, z_list)]


def _partial_sums(half: Sequence[TrigPolynomial], first: Sequence) -> Partial:
    """Partial lattice sums of one half, keyed by the sum, with the coefficient mass and count."""
    table: Partial = {}
    items = [list(f.coeffs.items()) for f in half[1:]]
    for choice in product(first, *items):
        key = tuple(sum(column) for column in zip(*(a for a, _ in choice)))
        weight = QQ_I.one
        for _, c in choice:
            weight = weight * c
        total, count = table.get(key, (QQ_I.zero, 0))
        table[key] = (total + weight, count + 1)
    return table


def _merge(tables: Sequence[Partial]) -> Partial:
    merged: Partial = {}
    for table in tables:
        for key, (total, count) in table.items():
            old_total, old_count = merged.get(key, (QQ_I.zero, 0))
            merged[key] = (old_total + total, old_count + count)
    return merged


def _tail_radius(functions: Sequence[TrigPolynomial]) -> "mp.mpf":
    """Σ_i tail_i · ∏_{j≠i} (ℓ¹_j + tail_j)."""
    if all(f.is_exact for f in functions):
        return mp.mpf(0)
    with working_precision(64):
        sizes = [f.l1_mass() + to_interval(f.tail_bound) for f in functions]
        total = iv.mpf(0)
        for i, f in enumerate(functions):
            if not f.tail_bound:
                continue
            term = to_interval(f.tail_bound)
            for j, size in enumerate(sizes):
                if j != i:
                    term = term * size
            total = total + term
        return upper(total)


def multi_correlation(
    f_list: Sequence[TrigPolynomial],
    z_list: Sequence[Sequence[int]],
    action: ZlAction,
    budget: Optional[int] = None,
    jobs: Optional[int] = None,
    separation: bool = False,
    precision: Optional[int] = None,
) -> CorrelationResult:
    """∫ ∏_i f_i(α(z_i)x) dx, matched half against half by partial lattice sums.

    The first half is built in parallel over chunks of f_0's support; the
    exact sums do not depend on the chunking.
    """
    budget = int(budget or get_setting("ENUMERATION_BUDGET"))
    jobs = int(jobs or get_setting("JOBS"))
    functions = _transformed(f_list, z_list, action)
    radius = _tail_radius(functions)
    stats = separation_stats(action, z_list, precision) if separation else None
    if any(not f.coeffs for f in functions):
        return CorrelationResult(QQ_I.zero, radius, 0, stats)

    middle = (len(functions) + 1) // 2
    left, right = functions[:middle], functions[middle:]
    cost = 1
    for f in left:
        cost *= len(f.coeffs)
    right_cost = 1
    for f in right:
        right_cost *= len(f.coeffs)
    if cost + right_cost > budget:
        raise BudgetExceeded(
            "The frequency tuples exceed the enumeration budget",
            {"tuples": cost + right_cost, "budget": budget},
        )

    support = list(left[0].coeffs.items())
    size = max(1, -(-len(support) // jobs))
    chunks = [support[k : k + size] for k in range(0, len(support), size)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        left_table = _merge(list(pool.map(lambda chunk: _partial_sums(left, chunk), chunks)))
    right_table = _partial_sums(right, list(right[0].coeffs.items()))

    value, matched = QQ_I.zero, 0
    for key, (total, count) in left_table.items():
        opposite = right_table.get(tuple(-v for v in key))
        if opposite is not None:
            value = value + total * opposite[0]
            matched += count * opposite[1]
    logger.debug("Matched %d tuples out of %d partial sums", matched, len(left_table))
    return CorrelationResult(value, radius, matched, stats)


def brute_force_correlation(
    f_list: Sequence[TrigPolynomial], z_list: Sequence[Sequence[int]], action: ZlAction
):
    """The same exact value by testing every frequency tuple directly."""
    functions = _transformed(f_list, z_list, action)
    value = QQ_I.zero
    for choice in product(*(f.coeffs.items() for f in functions)):
        if all(sum(column) == 0 for column in zip(*(a for a, _ in choice))):
            weight = QQ_I.one
            for _, c in choice:
                weight = weight * c
            value = value + weight
    return value


def separation_stats(
    action: ZlAction, z_list: Sequence[Sequence[int]], precision: Optional[int] = None
) -> SeparationStats:
    """N, N_*, N_*^! and the per-orbit maxima of a shape.

    On a torus every character is abelian, so the characters of the
    abelianization are all of them and N_*^! maximizes over the full spectrum.
    """
    issues = ActionValidator.validate_shape(action, z_list)
    if len(z_list) < 2:
        issues.append("A shape needs at least two vectors")
    if issues:
        raise DegenerateInstance("Invalid shape", {"issues": issues})
    precision = int(precision or get_setting("PRECISION_BITS"))
    pairs = [
        tuple(a - b for a, b in zip(z_list[i], z_list[j]))
        for i, j in combinations(range(len(z_list)), 2)
    ]
    log_n = min(max(abs(v) for v in d) for d in pairs)

    per_character: List["iv.mpf"] = []
    orbits: List[OrbitSeparation] = []
    defined = True
    for orbit in galois_orbits(simultaneous_spectrum(action, precision)):
        values = [lyapunov_map(orbit, d, precision) for d in pairs]
        with working_precision(precision + 16):
            for k in range(orbit.size):
                # over ordered pairs exactly one of ±ℓ_χ(d) is >= 0, up to enclosure
                smallest = None
                for row in values:
                    size = interval_abs(row[k])
                    smallest = size if smallest is None else interval_min(smallest, size)
                per_character.append(smallest)
            log_orbit = None
            for row in values:
                for sign in (1, -1):
                    top = None
                    for entry in row:
                        entry = entry * sign
                        top = entry if top is None else interval_max(top, entry)
                    if upper(top) < 0:
                        defined = False
                    log_orbit = top if log_orbit is None else interval_min(log_orbit, top)
        orbits.append(_orbit_check(orbit, log_orbit, log_n, precision))

    with working_precision(precision + 16):
        log_n_star, log_n_star_bang = per_character[0], per_character[0]
        for entry in per_character[1:]:
            log_n_star = interval_min(log_n_star, entry)
            log_n_star_bang = interval_max(log_n_star_bang, entry)
    if not defined:
        logger.warning("Some pair has no character value of modulus >= 1; N_* is undefined")
    return SeparationStats(log_n, log_n_star, log_n_star_bang, defined, orbits)


def _orbit_check(orbit, log_orbit, log_n: int, precision: int) -> OrbitSeparation:
    entry = OrbitSeparation(orbit.factor.to_json(), log_orbit)
    try:
        constant = lemma21_constant(orbit, precision)
    except DegenerateInstance:
        return entry
    entry.constant = constant
    with working_precision(precision + 16):
        slack = constant.lower - mp.mpf(2) ** (16 - precision)
        entry.holds = bool(lower(log_orbit) >= slack * log_n)
    return entry


@dataclass
class ShapePowerLaw:
    anosov: bool
    failures: List[Dict[str, Any]]
    base: SeparationStats
    rows: List[Dict[str, Any]]

    @property
    def holds(self) -> bool:
        return all(row["holds"] for row in self.rows)

    def to_json(self) -> Dict[str, Any]:
        return {
            "anosov": self.anosov,
            "anosov_failures": self.failures,
            "separation": self.base.to_json(),
            "power_law_holds": self.holds,
            "rows": self.rows,
        }


def shape_power_law(
    action: ZlAction,
    shape: Sequence[Sequence[int]],
    n_max: int,
    precision: Optional[int] = None,
) -> ShapePowerLaw:
    """Check N_*(n·shape) = N_*(shape)^n for n = 1..n_max, as overlapping enclosures."""
    precision = int(precision or get_setting("PRECISION_BITS"))
    anosov, failures = shape_is_anosov(action, shape, precision)
    if not anosov:
        logger.warning("Shape has non-Anosov quotients: %s", failures)
    base = separation_stats(action, shape, precision)
    rows = []
    for n in range(1, n_max + 1):
        scaled = separation_stats(action, [[n * v for v in z] for z in shape], precision)
        with working_precision(precision + 16):
            expected = base.log_n_star * n
            actual = scaled.log_n_star
            holds = lower(actual) <= upper(expected) and lower(expected) <= upper(actual)
        rows.append(
            {"n": n, "log_n_star": _fmt(actual), "expected": _fmt(expected), "holds": holds}
        )
    return ShapePowerLaw(anosov, failures, base, rows)
