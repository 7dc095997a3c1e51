"""Real-valued cocycles over rank-2 toral actions, given by their generator values.

A cocycle c(z, x) over α is determined by f_a = c(a, ·) and f_b = c(b, ·),
subject to the compatibility f_a∘b + f_b = f_b∘a + f_a.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from django.core.exceptions import ValidationError

from nilmix.algebra.matrices import UnimodularMatrix
from nilmix.conf import get_setting
from nilmix.spectrum.action import ZlAction
from nilmix.spectrum.certificates import ErgodicityCertificate, ergodicity_certificate
from nilmix.toral.trig import TrigPolynomial, to_fraction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TorusCocycle:
    action: ZlAction
    f_a: TrigPolynomial
    f_b: TrigPolynomial

    def __post_init__(self):
        issues = []
        if self.action.rank != 2:
            issues.append(f"Cocycles need a rank-2 action, got rank {self.action.rank}")
        for name, f in (("f_a", self.f_a), ("f_b", self.f_b)):
            if f.dim != self.action.dim:
                issues.append(f"{name} lives on T^{f.dim}, the action on T^{self.action.dim}")
            if not f.is_exact:
                issues.append(f"{name} must be an exact trigonometric polynomial")
            if not f.is_real():
                issues.append(f"{name} must be real-valued")
        if issues:
            raise ValidationError(issues)

    @property
    def a(self) -> UnimodularMatrix:
        return self.action.generators[0]

    @property
    def b(self) -> UnimodularMatrix:
        return self.action.generators[1]

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "TorusCocycle":
        return cls(
            ZlAction.from_json(data["action"]),
            TrigPolynomial.from_json(data["f_a"]),
            TrigPolynomial.from_json(data["f_b"]),
        )

    def value(self, j: int) -> TrigPolynomial:
        """c(bʲ, ·) = Σ_{k<j} f_b∘bᵏ for j >= 0."""
        total = TrigPolynomial(self.action.dim)
        for k in range(j):
            total = total.add(self.f_b.pullback(self.b ** k))
        return total

    def to_json(self) -> Dict[str, Any]:
        return {"action": self.action.to_json(), "f_a": self.f_a.to_json(), "f_b": self.f_b.to_json()}


def difference(f: TrigPolynomial, g: TrigPolynomial) -> TrigPolynomial:
    return f.add(g.scale(-1))


def real_part(c) -> Fraction:
    return to_fraction(c.x)


def coboundary(
    phi: TrigPolynomial,
    a: UnimodularMatrix,
    b: UnimodularMatrix,
    constants: Sequence = (0, 0),
) -> TorusCocycle:
    """The cocycle (φ∘a - φ + c₁, φ∘b - φ + c₂)."""
    c1, c2 = (TrigPolynomial.constant(phi.dim, Fraction(v)) for v in constants)
    return TorusCocycle(
        ZlAction((a, b)),
        difference(phi.pullback(a), phi).add(c1),
        difference(phi.pullback(b), phi).add(c2),
    )


class CocycleValidator:
    @staticmethod
    def compatibility_mismatches(c: TorusCocycle) -> List[Dict[str, Any]]:
        """Coefficients where f_a∘b + f_b and f_b∘a + f_a differ."""
        lhs = c.f_a.pullback(c.b).add(c.f_b)
        rhs = c.f_b.pullback(c.a).add(c.f_a)
        mismatches = []
        for freq in sorted(set(lhs.support) | set(rhs.support)):
            left, right = lhs.coefficient(freq), rhs.coefficient(freq)
            if left != right:
                mismatches.append(
                    {
                        "freq": list(freq),
                        "lhs": coefficient_json(left),
                        "rhs": coefficient_json(right),
                    }
                )
        return mismatches


@dataclass
class CocycleCertificate:
    valid: bool
    constants: Tuple[Fraction, Fraction]
    constants_additive: bool
    mismatches: List[Dict[str, Any]] = field(default_factory=list)
    ergodicity: Dict[str, ErgodicityCertificate] = field(default_factory=dict)
    issues: List[str] = field(default_factory=list)

    def to_json(self) -> Dict[str, Any]:
        return {
            "valid": self.valid,
            "constants": [str(v) for v in self.constants],
            "constants_additive": self.constants_additive,
            "mismatches": self.mismatches,
            "ergodicity": {name: cert.to_json() for name, cert in self.ergodicity.items()},
            "issues": self.issues,
        }


def cocycle_validate(
    c: TorusCocycle, certify: bool = True, precision: Optional[int] = None
) -> CocycleCertificate:
    """Check compatibility exactly, certify ergodicity, and test that c₀ is additive."""
    precision = precision or get_setting("PRECISION_BITS")
    issues = []
    mismatches = CocycleValidator.compatibility_mismatches(c)
    if mismatches:
        issues.append(f"Compatibility fails at {len(mismatches)} frequencies")
    constants = (real_part(c.f_a.mean()), real_part(c.f_b.mean()))
    # c(a+b, ·) expanded both ways
    via_b = c.f_a.pullback(c.b).add(c.f_b).mean()
    via_a = c.f_b.pullback(c.a).add(c.f_a).mean()
    additive = via_b == via_a == c.f_a.mean() + c.f_b.mean()
    if not additive:
        issues.append("The constant part is not a homomorphism")
    certificates: Dict[str, ErgodicityCertificate] = {}
    if certify:
        candidates = {"a": ZlAction((c.a,)), "b": ZlAction((c.b,)), "action": c.action}
        for name, action in candidates.items():
            certificates[name] = ergodicity_certificate(action, precision)
            if not certificates[name].ergodic:
                issues.append(f"Ergodicity fails for {name}")
    result = CocycleCertificate(not issues, constants, additive, mismatches, certificates, issues)
    if issues:
        logger.info("Cocycle rejected: %s", "; ".join(issues))
    return result


def subtract_average(c: TorusCocycle) -> Tuple[TorusCocycle, Tuple[Fraction, Fraction]]:
    """(c - c₀, c₀) with c₀ the generator means."""
    dim = c.action.dim
    zero = (0,) * dim
    means = (c.f_a.mean(), c.f_b.mean())
    stripped = []
    for f in (c.f_a, c.f_b):
        coeffs = dict(f.coeffs)
        coeffs.pop(zero, None)
        stripped.append(TrigPolynomial(dim, coeffs))
    return TorusCocycle(c.action, *stripped), (real_part(means[0]), real_part(means[1]))


def is_zero(f: TrigPolynomial) -> bool:
    return not f.coeffs and f.tail_bound == 0


def coefficient_json(c) -> List[str]:
    return [str(to_fraction(c.x)), str(to_fraction(c.y))]
