"""Brute-force search for solutions of the S-unit inequality

    |b_1 + b_2 x_2 + ... + b_s x_s|_v < H(x_2, ..., x_s)^{-ε}

with x_j = ζ · ε_1^{e_1} ··· ε_r^{e_r} units of a number field. Vanishing
subsums are decided exactly in the field.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Any, Dict, List, Optional, Sequence, Tuple

from django.core.exceptions import ValidationError
from mpmath import iv

from nilmix.algebra.intervals import (
    certainly_less,
    interval_max,
    lower,
    to_interval,
    upper,
    working_precision,
)
from nilmix.algebra.numberfield import NumberField, NumberFieldElement
from nilmix.algebra.polynomials import IntPolynomial
from nilmix.conf import get_setting
from nilmix.exceptions import BudgetExceeded, CertificationUndecided

logger = logging.getLogger(__name__)

NONDEGENERATE = "nondegenerate"
VANISHING_SUBSUM = "vanishing_subsum"
FULL_CANCELLATION = "full_cancellation"


def _coords(value) -> List[Fraction]:
    """Power-basis coordinates; a bare number is a rational element."""
    if isinstance(value, (list, tuple)):
        return [Fraction(str(c)) for c in value]
    return [Fraction(str(value))]


@dataclass(frozen=True)
class SUnitInstance:
    field: NumberField
    units: Tuple[NumberFieldElement, ...]
    coefficients: Tuple[NumberFieldElement, ...]
    place: int
    epsilon: Fraction
    roots_of_unity: Tuple[NumberFieldElement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        issues = []
        elements = list(self.units) + list(self.coefficients) + list(self.roots_of_unity)
        if any(x.field != self.field for x in elements):
            issues.append("Every unit, coefficient and root of unity must lie in the instance field")
        for index, unit in enumerate(self.units):
            if not unit.is_unit():
                issues.append(f"units[{index}] = {unit} is not a unit (norm ±1, integral)")
        for index, zeta in enumerate(self.roots_of_unity):
            if zeta.root_of_unity_order() is None:
                issues.append(f"roots_of_unity[{index}] = {zeta} is not a root of unity")
        if not self.coefficients:
            issues.append("At least one coefficient b_1 is required")
        if any(b.is_zero for b in self.coefficients):
            issues.append("Coefficients must be nonzero")
        if not 0 <= self.place < self.field.degree:
            issues.append(f"Place index {self.place} out of range")
        if self.epsilon <= 0:
            issues.append("epsilon must be positive")
        if issues:
            raise ValidationError(issues)

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "SUnitInstance":
        field_ = NumberField(IntPolynomial(tuple(int(c) for c in data["field"])))
        return cls(
            field_,
            tuple(field_.element(_coords(x)) for x in data["units"]),
            tuple(field_.element(_coords(b)) for b in data["coefficients"]),
            int(data.get("place", 0)),
            Fraction(str(data["epsilon"])),
            tuple(field_.element(_coords(x)) for x in data.get("roots_of_unity", [])),
        )

    @property
    def s(self) -> int:
        return len(self.coefficients)

    def torsion(self) -> List[NumberFieldElement]:
        """The group generated by -1 and the supplied roots of unity."""
        group = [self.field.one()]
        generators = [-self.field.one()] + list(self.roots_of_unity)
        frontier = list(group)
        while frontier:
            grown = []
            for g in frontier:
                for zeta in generators:
                    candidate = g * zeta
                    if candidate not in group:
                        group.append(candidate)
                        grown.append(candidate)
            frontier = grown
        return group


@dataclass(frozen=True)
class _Candidate:
    torsion: int
    exponents: Tuple[int, ...]
    value: NumberFieldElement

    @property
    def level(self) -> int:
        return max((abs(e) for e in self.exponents), default=0)


@dataclass
class SUnitResult:
    solutions: List[Dict[str, Any]]
    counts_by_box: List[int]
    stabilized_at: int
    box: int
    partial: bool
    candidates_checked: int
    degenerate: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return self.stabilized_at < self.box

    def to_json(self) -> Dict[str, Any]:
        return {
            "solutions": self.solutions,
            "degenerate": self.degenerate,
            "counts_by_box": self.counts_by_box,
            "stabilized_at": self.stabilized_at,
            "stable": self.stable,
            "box": self.box,
            "partial": self.partial,
            "candidates_checked": self.candidates_checked,
        }


def _candidates(instance: SUnitInstance, box: int) -> List[_Candidate]:
    torsion = instance.torsion()
    result = []
    for exponents in product(range(-box, box + 1), repeat=len(instance.units)):
        unit_part = instance.field.one()
        for unit, e in zip(instance.units, exponents):
            if e:
                unit_part = unit_part * unit**e
        for index, zeta in enumerate(torsion):
            result.append(_Candidate(index, exponents, zeta * unit_part))
    return result


def _fit_box(instance: SUnitInstance, box: int, budget: int) -> int:
    torsion = len(instance.torsion())

    def tuples(b: int) -> int:
        return (torsion * (2 * b + 1) ** len(instance.units)) ** (instance.s - 1)

    if tuples(box) <= budget:
        return box
    fitted = box
    while fitted >= 0 and tuples(fitted) > budget:
        fitted -= 1
    if fitted < 0:
        raise BudgetExceeded(
            "Even the trivial exponent box exceeds the enumeration budget",
            {"budget": budget, "tuples": tuples(0)},
        )
    return fitted


class _Embedded:
    """Place data of the candidates at one precision, prepared in the calling thread."""

    def __init__(self, instance: SUnitInstance, candidates: Sequence[_Candidate], bits: int):
        places = instance.field.places(bits)
        self.local_degree = 1 if instance.field.roots(bits)[instance.place].real else 2
        self.b1 = instance.coefficients[0].embeddings(bits)[instance.place]
        # terms[j][k] = σ_v(b_{j+2} x) for candidate k
        self.terms = [
            [(b * c.value).embeddings(bits)[instance.place] for c in candidates]
            for b in instance.coefficients[1:]
        ]
        # weighted log|σ_w(x)| per archimedean place w
        self.logs = []
        with working_precision(bits + 16):
            for c in candidates:
                values = c.value.embeddings(bits)
                self.logs.append(
                    [
                        values[index].log_modulus() * (1 if is_real else 2)
                        for index, is_real in places
                    ]
                )
        self.epsilon = instance.epsilon


def _classify(embedded: _Embedded, chosen: Sequence[int]) -> Optional[bool]:
    """True/False when the inequality certainly holds/fails, None when undecided."""
    total = embedded.b1
    for terms, k in zip(embedded.terms, chosen):
        total = total + terms[k]
    size = total.modulus()
    lhs = size if embedded.local_degree == 1 else size**2
    log_height = iv.mpf(0)
    for w in range(len(embedded.logs[chosen[0]]) if chosen else 0):
        largest = iv.mpf(0)
        for k in chosen:
            largest = interval_max(largest, embedded.logs[k][w])
        log_height = log_height + largest
    rhs = iv.exp(-to_interval(embedded.epsilon) * log_height)
    if certainly_less(lhs, rhs):
        return True
    if lower(lhs) >= upper(rhs):
        return False
    return None


def _scan(embedded: _Embedded, first: int, count: int, s: int):
    hits, undecided = [], []
    for rest in product(range(count), repeat=max(s - 2, 0)):
        chosen = (first,) + rest if s > 1 else ()
        verdict = _classify(embedded, chosen)
        if verdict is None:
            undecided.append(chosen)
        elif verdict:
            hits.append(chosen)
    return hits, undecided


def _label(instance: SUnitInstance, candidates: Sequence[_Candidate], chosen: Sequence[int]) -> str:
    terms = [instance.coefficients[0]] + [
        b * candidates[k].value for b, k in zip(instance.coefficients[1:], chosen)
    ]
    zero = instance.field.zero()
    if sum(terms, zero).is_zero:
        return FULL_CANCELLATION
    for size in range(1, len(terms)):
        for subset in combinations(terms, size):
            if sum(subset, zero).is_zero:
                return VANISHING_SUBSUM
    return NONDEGENERATE


def _resolve(instance, candidates, chosen, bits: int) -> bool:
    """Re-decide an undecided tuple with exact zero detection and rising precision."""
    total = instance.coefficients[0]
    for b, k in zip(instance.coefficients[1:], chosen):
        total = total + b * candidates[k].value
    if total.is_zero:
        return True
    cap = get_setting("PRECISION_CAP_BITS")
    subset = [candidates[k] for k in sorted(set(chosen))]
    index = {k: i for i, k in enumerate(sorted(set(chosen)))}
    while bits * 2 <= cap:
        bits *= 2
        embedded = _Embedded(instance, subset, bits)
        with working_precision(bits + 16):
            verdict = _classify(embedded, [index[k] for k in chosen])
        if verdict is not None:
            return verdict
    raise CertificationUndecided(
        "Could not decide the S-unit inequality for a candidate",
        {"exponents": [list(candidates[k].exponents) for k in chosen]},
    )


def sunit_solutions(
    instance: SUnitInstance,
    box: int,
    precision: Optional[int] = None,
    jobs: Optional[int] = None,
    budget: Optional[int] = None,
) -> SUnitResult:
    """Every solution x̄ with exponents in [-box, box], labeled by degeneracy.

    Results are sorted by (torsion index, exponent vector) per coordinate, so
    the output does not depend on ``jobs``.
    """
    if box < 0:
        raise ValueError("The exponent box must be nonnegative")
    precision = int(precision or get_setting("PRECISION_BITS"))
    jobs = int(jobs or get_setting("JOBS"))
    budget = int(budget or get_setting("ENUMERATION_BUDGET"))
    used = _fit_box(instance, box, budget)
    partial = used < box
    if partial:
        logger.warning("Exponent box %d exceeds the budget; searching box %d", box, used)

    candidates = _candidates(instance, used)
    embedded = _Embedded(instance, candidates, precision)
    s = instance.s
    firsts = range(len(candidates)) if s > 1 else [0]
    hits: List[Tuple[int, ...]] = []
    undecided: List[Tuple[int, ...]] = []
    # mpmath precision is process-wide: workers only read it
    with working_precision(precision + 16):
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for found, open_ in pool.map(
                lambda first: _scan(embedded, first, len(candidates), s), firsts
            ):
                hits.extend(found)
                undecided.extend(open_)
    for chosen in undecided:
        if _resolve(instance, candidates, chosen, precision):
            hits.append(chosen)

    def key(chosen):
        return tuple((candidates[k].exponents, candidates[k].torsion) for k in chosen)

    solutions, degenerate = [], []
    for chosen in sorted(set(hits), key=key):
        label = _label(instance, candidates, chosen)
        level = max((candidates[k].level for k in chosen), default=0)
        record = {
            "x": [candidates[k].value.to_json() for k in chosen],
            "exponents": [list(candidates[k].exponents) for k in chosen],
            "torsion": [candidates[k].torsion for k in chosen],
            "level": level,
            "label": label,
        }
        (solutions if label == NONDEGENERATE else degenerate).append(record)

    counts = [sum(1 for r in solutions if r["level"] <= b) for b in range(used + 1)]
    stabilized = next(b for b in range(used + 1) if counts[b] == counts[-1])
    checked = len(candidates) ** (s - 1)
    logger.info(
        "S-unit search: %d nondegenerate, %d degenerate, box %d, stable from %d",
        len(solutions),
        len(degenerate),
        used,
        stabilized,
    )
    return SUnitResult(solutions, counts, stabilized, used, partial, checked, degenerate)
