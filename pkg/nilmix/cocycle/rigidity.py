"""Coboundary solving, σ² and the cocycle-rigidity pipeline in the trigonometric-polynomial category.

With B = aᵀ and m_k = Bᵏm_0 along a dual orbit, f = φ∘a - φ reads
f̂(m_k) = φ̂(m_{k-1}) - φ̂(m_k). It is solvable iff every orbit sum Σ_k f̂(m_k)
vanishes, and then φ̂(m_k) = -Σ_{j<=k} f̂(m_j).
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy.polys.domains import QQ_I

from nilmix.algebra.matrices import UnimodularMatrix, rational_nullspace, rational_rank
from nilmix.cocycle.cocycles import (
    TorusCocycle,
    coefficient_json,
    cocycle_validate,
    difference,
    is_zero,
    subtract_average,
)
from nilmix.cocycle.orbits import DualOrbitDecomposition, dual_orbits, sup_norm
from nilmix.conf import get_setting
from nilmix.exceptions import BudgetExceeded, DegenerateInstance, InternalConsistencyError
from nilmix.spectrum.action import ZlAction
from nilmix.spectrum.certificates import ergodicity_certificate
from nilmix.toral.trig import TrigPolynomial, conjugate, gaussian, to_fraction

logger = logging.getLogger(__name__)

TELESCOPING_CHECKS = ((1, 1), (2, 1), (1, 2))
HIGHER_RANK_WINDOW = 4


@lru_cache(maxsize=64)
def _require_ergodic(a: UnimodularMatrix):
    certificate = ergodicity_certificate(ZlAction((a,)))
    if not certificate.ergodic:
        raise DegenerateInstance(
            "The automorphism is not ergodic; dual orbits may recur",
            {"matrix": a.to_json(), "counterexample": certificate.counterexample},
        )


def _check_function(f: TrigPolynomial, a: UnimodularMatrix, zero_mean: bool = True):
    issues = []
    if f.dim != a.dim:
        issues.append(f"Function on T^{f.dim} but matrix of size {a.dim}")
    if not f.is_exact:
        issues.append("The function must be an exact trigonometric polynomial")
    if zero_mean and f.mean() != QQ_I.zero:
        issues.append("The function must have zero mean")
    if issues:
        raise DegenerateInstance("; ".join(issues), {"function": f.to_json()})


def _squared_modulus(c) -> Fraction:
    return to_fraction(c.x) ** 2 + to_fraction(c.y) ** 2


def _inner(f: TrigPolynomial, m: UnimodularMatrix):
    """⟨f∘m, f⟩ = Σ_n f̂(n) conj f̂(mᵀn)."""
    transpose = m.transpose()
    total = QQ_I.zero
    for n, c in f.coeffs.items():
        image = f.coefficient(transpose.apply(n))
        if image:
            total = total + c * conjugate(image)
    return total


@dataclass
class SigmaSquared:
    value: Fraction
    series: Fraction
    orbit_sum: Fraction
    energy: Fraction
    cross_terms: List[Tuple[int, Fraction]] = field(default_factory=list)
    orbits: int = 0

    def to_json(self) -> Dict[str, Any]:
        return {
            "value": str(self.value),
            "series_route": str(self.series),
            "orbit_route": str(self.orbit_sum),
            "energy": str(self.energy),
            "cross_terms": [[i, str(v)] for i, v in self.cross_terms],
            "orbits": self.orbits,
        }


def _series_route(f: TrigPolynomial, a: UnimodularMatrix) -> Tuple[Fraction, List[Tuple[int, Fraction]]]:
    """∫f² + 2 Σ_{i>=1} ⟨f∘aⁱ, f⟩, walked until every image has left the support window."""
    horizon = get_setting("ORBIT_HORIZON")
    limit = get_setting("ORBIT_STEP_LIMIT")
    step = a.transpose()
    radius = f.support_radius()
    images = {n: n for n in f.support if any(n)}
    energy = sum((_squared_modulus(c) for c in f.coeffs.values()), Fraction(0))
    total, terms, outside = energy, [], 0
    for i in range(1, limit + 1):
        if not images:
            break
        images = {n: step.apply(m) for n, m in images.items()}
        if all(sup_norm(m) > radius for m in images.values()):
            outside += 1
            if outside > horizon:
                return total, terms
            continue
        outside = 0
        term = QQ_I.zero
        for n, m in images.items():
            image = f.coefficient(m)
            if image:
                term = term + f.coeffs[n] * conjugate(image)
        if term:
            value = to_fraction(term.x)
            terms.append((i, value))
            total += 2 * value
    else:
        raise BudgetExceeded("σ² series did not terminate", {"steps": limit})
    return total, terms


def sigma_squared(f: TrigPolynomial, a: UnimodularMatrix, certify: bool = True) -> SigmaSquared:
    """σ² = ∫f² + 2Σ_{i>=1}⟨f∘aⁱ, f⟩ by the series and by dual-orbit sums; both must agree."""
    _check_function(f, a)
    if not f.is_real():
        raise DegenerateInstance("σ² needs a real-valued function", {"function": f.to_json()})
    if certify:
        _require_ergodic(a)
    decomposition = dual_orbits(f.support, a)
    orbit_sum = sum((_squared_modulus(o.total(f)) for o in decomposition.orbits), Fraction(0))
    series, terms = _series_route(f, a)
    energy = sum((_squared_modulus(c) for c in f.coeffs.values()), Fraction(0))
    if series != orbit_sum:
        raise InternalConsistencyError(
            "σ² routes disagree",
            {"series_route": str(series), "orbit_route": str(orbit_sum), "function": f.to_json()},
        )
    logger.debug("σ² = %s over %d dual orbits", orbit_sum, len(decomposition.orbits))
    return SigmaSquared(orbit_sum, series, orbit_sum, energy, terms, len(decomposition.orbits))


@dataclass
class CoboundarySolution:
    phi: Optional[TrigPolynomial]
    obstructions: List[Dict[str, Any]]
    decomposition: DualOrbitDecomposition

    @property
    def solvable(self) -> bool:
        return self.phi is not None

    def to_json(self) -> Dict[str, Any]:
        return {
            "solvable": self.solvable,
            "phi": self.phi.to_json() if self.phi is not None else None,
            "obstructions": self.obstructions,
            "orbits": len(self.decomposition.orbits),
        }


def coboundary_solve(f: TrigPolynomial, a: UnimodularMatrix, certify: bool = True) -> CoboundarySolution:
    """Zero-mean φ with φ∘a - φ = f, or the dual orbits whose sums obstruct it."""
    _check_function(f, a, zero_mean=False)
    if certify:
        _require_ergodic(a)
    decomposition = dual_orbits(f.support, a)
    obstructions = []
    if f.mean() != QQ_I.zero:
        obstructions.append({"representative": [0] * f.dim, "sum": coefficient_json(f.mean())})
    coeffs: Dict[Tuple[int, ...], Any] = {}
    for orbit in decomposition.orbits:
        sums = orbit.partial_sums(f)
        if sums[-1] != QQ_I.zero:
            obstructions.append(
                {"representative": list(orbit.representative), "sum": coefficient_json(sums[-1])}
            )
            continue
        for m, partial in zip(orbit.path, sums):
            if partial:
                coeffs[m] = -partial
    if obstructions:
        logger.info("No trigonometric coboundary: %d obstructing orbits", len(obstructions))
        return CoboundarySolution(None, obstructions, decomposition)
    phi = TrigPolynomial(f.dim, coeffs)
    if difference(phi.pullback(a), phi).coeffs != f.coeffs:
        raise InternalConsistencyError(
            "Recovered transfer function does not reproduce f",
            {"function": f.to_json(), "phi": phi.to_json()},
        )
    return CoboundarySolution(phi, [], decomposition)


def telescoping_check(c: TorusCocycle, n: int, j: int) -> Dict[str, Any]:
    """Σ_{i=-n}^{n} (f∘aⁱbʲ - f∘aⁱ) = h∘a^{n+1} - h∘a^{-n} with f = c(a, ·), h = c(bʲ, ·)."""
    f, h = c.f_a, c.value(j)
    lhs = TrigPolynomial(f.dim)
    for i in range(-n, n + 1):
        lhs = lhs.add(difference(f.pullback(c.action.element((i, j))), f.pullback(c.a ** i)))
    rhs = difference(h.pullback(c.a ** (n + 1)), h.pullback(c.a ** (-n)))
    holds = lhs.coeffs == rhs.coeffs
    return {"n": n, "j": j, "holds": holds, "terms": len(lhs.coeffs)}


def higher_rank_sum(f: TrigPolynomial, action: ZlAction, window: Optional[int] = None) -> Dict[str, Any]:
    """The nonzero terms of Σ_{i,j} ⟨f∘aⁱbʲ, f⟩ over |i|, |j| <= window."""
    window = int(window or HIGHER_RANK_WINDOW)
    a, b = action.generators
    a_powers = {i: a ** i for i in range(-window, window + 1)}
    b_powers = {j: b ** j for j in range(-window, window + 1)}
    terms, total, on_boundary = [], Fraction(0), False
    for i, j in itertools.product(range(-window, window + 1), repeat=2):
        value = _inner(f, a_powers[i] @ b_powers[j])
        if value:
            real = to_fraction(value.x)
            terms.append([i, j, str(real)])
            total += real
            on_boundary = on_boundary or max(abs(i), abs(j)) == window
    return {"window": window, "terms": terms, "total": str(total), "boundary_clear": not on_boundary}


@dataclass
class RigidityReport:
    constants: Tuple[Fraction, Fraction]
    phi: Optional[TrigPolynomial]
    sigma: SigmaSquared
    solution: CoboundarySolution
    telescoping: List[Dict[str, Any]]
    higher_rank: Dict[str, Any]
    residual_zero: Optional[bool]
    validation: Dict[str, Any]

    @property
    def falsified(self) -> bool:
        return self.sigma.value != 0 or self.phi is None or not self.residual_zero

    def to_json(self) -> Dict[str, Any]:
        return {
            "constants": [str(v) for v in self.constants],
            "phi": self.phi.to_json() if self.phi is not None else None,
            "sigma_squared": self.sigma.to_json(),
            "coboundary": self.solution.to_json(),
            "telescoping": self.telescoping,
            "higher_rank": self.higher_rank,
            "residual_zero": self.residual_zero,
            "validation": self.validation,
            "falsified": self.falsified,
        }


def rigidity_pipeline(
    c: TorusCocycle,
    telescoping: Sequence[Sequence[int]] = TELESCOPING_CHECKS,
    window: Optional[int] = None,
    certify: bool = True,
    precision: Optional[int] = None,
) -> RigidityReport:
    """Strip the constants, run the exact identities, and solve for the transfer function."""
    certificate = cocycle_validate(c, certify, precision)
    if not certificate.valid:
        raise DegenerateInstance("The cocycle fails validation", certificate.to_json())
    stripped, constants = subtract_average(c)
    checks = [telescoping_check(stripped, int(n), int(j)) for n, j in telescoping]
    failed = [check for check in checks if not check["holds"]]
    if failed:
        raise InternalConsistencyError("Telescoping identity fails on a validated cocycle", {"checks": failed})
    higher_rank = higher_rank_sum(stripped.f_a, c.action, window)
    sigma = sigma_squared(stripped.f_a, c.a, certify=False)
    solution = coboundary_solve(stripped.f_a, c.a, certify=False)
    residual_zero = None
    if solution.phi is not None:
        phi = solution.phi
        residual_zero = is_zero(difference(stripped.f_b, difference(phi.pullback(c.b), phi)))
    report = RigidityReport(
        constants, solution.phi, sigma, solution, checks, higher_rank, residual_zero, certificate.to_json()
    )
    if report.falsified:
        logger.warning(
            "Cocycle rigidity falsification event: σ² = %s, residual zero = %s", sigma.value, residual_zero
        )
    else:
        logger.info("Cocycle is cohomologous to the constant cocycle %s", [str(v) for v in constants])
    return report


def _window(dim: int, radius: int) -> List[Tuple[int, ...]]:
    return list(itertools.product(range(-radius, radius + 1), repeat=dim))


def compatibility_rows(action: ZlAction, freqs: Sequence[Tuple[int, ...]]) -> List[List[int]]:
    """Linear equations f_a∘b + f_b - f_b∘a - f_a = 0 in the coefficients on ``freqs``.

    Columns are f̂_a(n) for n in ``freqs`` followed by f̂_b(n).
    """
    a_t, b_t = (g.transpose() for g in action.generators)
    size = len(freqs)
    equations: Dict[Tuple[int, ...], Dict[int, int]] = {}

    def add(m, column, value):
        row = equations.setdefault(m, {})
        row[column] = row.get(column, 0) + value

    for index, n in enumerate(freqs):
        add(b_t.apply(n), index, 1)
        add(n, index, -1)
        add(n, size + index, 1)
        add(a_t.apply(n), size + index, -1)
    rows = []
    for m in sorted(equations):
        row = [0] * (2 * size)
        for column, value in equations[m].items():
            row[column] = value
        if any(row):
            rows.append(row)
    return rows


@dataclass
class SolutionSpace:
    radius: int
    unknowns: int
    solutions: int
    coboundaries: int
    constants: int = 2

    @property
    def holds(self) -> bool:
        return self.solutions == self.coboundaries + self.constants

    def to_json(self) -> Dict[str, Any]:
        return {
            "radius": self.radius,
            "unknowns": self.unknowns,
            "solutions": self.solutions,
            "coboundaries": self.coboundaries,
            "constants": self.constants,
            "holds": self.holds,
        }


def solution_space_check(action: ZlAction, radius: int) -> SolutionSpace:
    """Compare dim{compatible (f_a, f_b) on the window} with dim{coboundaries on it} + 2.

    Transfer functions of window cocycles live on the a-orbit paths through
    the window, so the coboundary side is the space of such φ whose
    coboundary stays inside the window.
    """
    if action.rank != 2:
        raise DegenerateInstance(f"Cocycles need a rank-2 action, got rank {action.rank}")
    a, b = action.generators
    window = _window(action.dim, radius)
    inside = set(window)
    rows = compatibility_rows(action, window)
    solutions = 2 * len(window) - rational_rank(rows)

    paths = sorted(set(dual_orbits(window, a).frequencies()))
    constraints: Dict[Tuple[int, Tuple[int, ...]], Dict[int, int]] = {}
    for component, g in enumerate((a, b)):
        g_t = g.transpose()
        for index, q in enumerate(paths):
            for m, value in ((g_t.apply(q), 1), (q, -1)):
                if m not in inside:
                    row = constraints.setdefault((component, m), {})
                    row[index] = row.get(index, 0) + value
    dense = []
    for key in sorted(constraints):
        row = [0] * len(paths)
        for column, value in constraints[key].items():
            row[column] = value
        if any(row):
            dense.append(row)
    coboundaries = len(paths) - rational_rank(dense)
    result = SolutionSpace(radius, 2 * len(window), solutions, coboundaries)
    if not result.holds:
        logger.warning("Solution-space dimensions differ: %s", result.to_json())
    return result


def sample_compatible(action: ZlAction, radius: int, seed: int = 0, spread: int = 3) -> TorusCocycle:
    """A random real solution of the compatibility system with coefficients on the window."""
    window = _window(action.dim, radius)
    basis = rational_nullspace(compatibility_rows(action, window), 2 * len(window))
    rng = np.random.default_rng(seed)
    weights = rng.integers(-spread, spread + 1, size=len(basis))
    vector = [Fraction(0)] * (2 * len(window))
    for weight, basis_vector in zip(weights, basis):
        if weight:
            vector = [v + int(weight) * w for v, w in zip(vector, basis_vector)]
    size = len(window)
    functions = []
    for offset in (0, size):
        coeffs: Dict[Tuple[int, ...], Any] = {}
        for index, n in enumerate(window):
            value = vector[offset + index]
            if value:
                # f(x) + f(-x) is real for rational coefficients
                for key in (n, tuple(-v for v in n)):
                    coeffs[key] = coeffs.get(key, QQ_I.zero) + gaussian(value)
        functions.append(TrigPolynomial(action.dim, coeffs))
    return TorusCocycle(action, *functions)
