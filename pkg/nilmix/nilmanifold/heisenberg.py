"""The Heisenberg group in polarized coordinates and its lattice-preserving automorphisms.

The group law is (x, y, z)·(x', y', z') = (x + x', y + y', z + z' + x y') and
the lattice is Λ = ℤ³. Points are exact on :class:`~fractions.Fraction`
coordinates; the ``*_array`` variants act on float arrays of shape (n, 3).
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from django.core.exceptions import ValidationError

from nilmix.algebra.matrices import UnimodularMatrix
from nilmix.exceptions import InternalConsistencyError
from nilmix.spectrum.action import ZlAction

logger = logging.getLogger(__name__)


class HeisPoint(NamedTuple):
    x: Any
    y: Any
    z: Any

    @classmethod
    def parse(cls, values: Sequence) -> "HeisPoint":
        x, y, z = (Fraction(str(v)) if isinstance(v, str) else v for v in values)
        return cls(x, y, z)

    def is_lattice(self) -> bool:
        return all(Fraction(v).denominator == 1 for v in self)


IDENTITY = HeisPoint(0, 0, 0)


def heis_mul(p: HeisPoint, q: HeisPoint) -> HeisPoint:
    return HeisPoint(p.x + q.x, p.y + q.y, p.z + q.z + p.x * q.y)


def heis_inverse(p: HeisPoint) -> HeisPoint:
    return HeisPoint(-p.x, -p.y, -p.z + p.x * p.y)


def _half(value):
    return value / 2 if isinstance(value, float) else Fraction(value) / 2


def heis_exp(v: Sequence) -> HeisPoint:
    """exp of the Lie algebra vector (a, b, c): the one-parameter subgroup at time 1."""
    a, b, c = v
    return HeisPoint(a, b, c + _half(a * b))


def heis_reduce(p: HeisPoint) -> Tuple[HeisPoint, HeisPoint]:
    """(r, λ) with p = r·λ, r ∈ [0,1)³ and λ ∈ ℤ³; y is reduced first, then x, then z."""
    ly = math.floor(p.y)
    lx = math.floor(p.x)
    rx, ry = p.x - lx, p.y - ly
    shifted = p.z - rx * ly
    lz = math.floor(shifted)
    return HeisPoint(rx, ry, shifted - lz), HeisPoint(lx, ly, lz)


def heis_mul_array(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = p + q
    out[:, 2] += p[:, 0] * q[:, 1]
    return out


def heis_exp_array(v: np.ndarray) -> np.ndarray:
    out = np.array(v, dtype=float, copy=True)
    out[:, 2] += v[:, 0] * v[:, 1] / 2
    return out


def reduce_array(points: np.ndarray) -> np.ndarray:
    """Fundamental-domain representatives of float points, same order as :func:`heis_reduce`."""
    ly = np.floor(points[:, 1])
    rx = points[:, 0] - np.floor(points[:, 0])
    ry = points[:, 1] - ly
    shifted = points[:, 2] - rx * ly
    rz = shifted - np.floor(shifted)
    out = np.stack([rx, ry, rz], axis=1)
    # floor(-tiny) + 1 rounds to exactly 1.0
    out[out >= 1.0] = 0.0
    return out


def _quadratic(block: UnimodularMatrix, x, y):
    """½[(ax+by)(cx+dy) - xy], the part of κ forced by the group law."""
    (a, b), (c, d) = block.entries
    return _half((a * x + b * y) * (c * x + d * y) - x * y)


def canonical_linear(block: UnimodularMatrix) -> Tuple[Fraction, Fraction]:
    """The linear adjustment in {0, -1/2}² that makes κ integral on ℤ²."""
    (a, b), (c, d) = block.entries
    return (-Fraction(a * c % 2, 2), -Fraction(b * d % 2, 2))


class HeisAutoValidator:
    @staticmethod
    def validate(block: UnimodularMatrix, kappa_linear: Sequence[Fraction]) -> List[str]:
        issues = []
        if block.dim != 2:
            return [f"The block must be 2x2, got {block.dim}x{block.dim}"]
        if block.det != 1:
            issues.append(f"The block must have determinant 1, got {block.det}")
            return issues
        k1, k2 = kappa_linear
        for x, y, k in ((1, 0, k1), (0, 1, k2)):
            value = _quadratic(block, x, y) + k
            if value.denominator != 1:
                issues.append(f"κ({x},{y}) = {value} is not an integer; Λ is not preserved")
        return issues


@dataclass(frozen=True)
class HeisAuto:
    """β(x, y, z) = (A(x, y), z + κ(x, y)) with κ = ½[(ax+by)(cx+dy) - xy] + k₁x + k₂y."""

    block: UnimodularMatrix
    kappa_linear: Optional[Tuple[Fraction, Fraction]] = None

    def __post_init__(self):
        block = self.block if isinstance(self.block, UnimodularMatrix) else UnimodularMatrix(self.block)
        object.__setattr__(self, "block", block)
        linear = self.kappa_linear
        if linear is None:
            linear = canonical_linear(block) if block.dim == 2 else (Fraction(0), Fraction(0))
        object.__setattr__(self, "kappa_linear", tuple(Fraction(str(v)) for v in linear))
        issues = HeisAutoValidator.validate(block, self.kappa_linear)
        if issues:
            raise ValidationError(issues)

    @classmethod
    def identity(cls) -> "HeisAuto":
        return cls(UnimodularMatrix.identity(2), (0, 0))

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "HeisAuto":
        linear = data.get("kappa_linear")
        return cls(
            UnimodularMatrix(tuple(map(tuple, data["block"]))),
            None if linear is None else tuple(Fraction(str(v)) for v in linear),
        )

    def kappa(self, x, y):
        k1, k2 = self.kappa_linear
        return _quadratic(self.block, x, y) + k1 * x + k2 * y

    def apply(self, p: HeisPoint) -> HeisPoint:
        (a, b), (c, d) = self.block.entries
        return HeisPoint(a * p.x + b * p.y, c * p.x + d * p.y, p.z + self.kappa(p.x, p.y))

    def apply_array(self, points: np.ndarray) -> np.ndarray:
        (a, b), (c, d) = self.block.entries
        x, y = points[:, 0], points[:, 1]
        k1, k2 = (float(v) for v in self.kappa_linear)
        kappa = ((a * x + b * y) * (c * x + d * y) - x * y) / 2 + k1 * x + k2 * y
        return np.stack([a * x + b * y, c * x + d * y, points[:, 2] + kappa], axis=1)

    def preserves_lattice(self) -> bool:
        return all(
            self.apply(HeisPoint(*e)).is_lattice() for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))
        )

    def _from_kappa(self, block: UnimodularMatrix, kappa) -> "HeisAuto":
        """The automorphism with ``block`` whose z-correction is the function ``kappa``."""
        linear = (
            Fraction(kappa(1, 0)) - _quadratic(block, Fraction(1), Fraction(0)),
            Fraction(kappa(0, 1)) - _quadratic(block, Fraction(0), Fraction(1)),
        )
        result = HeisAuto(block, linear)
        for x, y in ((Fraction(1, 3), Fraction(-2, 5)), (Fraction(7, 2), Fraction(3))):
            if result.kappa(x, y) != kappa(x, y):
                raise InternalConsistencyError(
                    "Composed z-correction is not of the required quadratic form",
                    {"block": block.to_json(), "point": [str(x), str(y)]},
                )
        return result

    def compose(self, other: "HeisAuto") -> "HeisAuto":
        """self ∘ other."""

        def kappa(x, y):
            inner = other.apply(HeisPoint(x, y, 0))
            return inner.z + self.kappa(inner.x, inner.y)

        return self._from_kappa(self.block @ other.block, kappa)

    def inverse(self) -> "HeisAuto":
        block = self.block.inverse()

        def kappa(x, y):
            (a, b), (c, d) = block.entries
            return -self.kappa(a * x + b * y, c * x + d * y)

        return self._from_kappa(block, kappa)

    def __pow__(self, n: int) -> "HeisAuto":
        base = self if n >= 0 else self.inverse()
        result = HeisAuto.identity()
        for _ in range(abs(n)):
            result = base.compose(result)
        return result

    def to_json(self) -> Dict[str, Any]:
        return {"block": self.block.to_json(), "kappa_linear": [str(v) for v in self.kappa_linear]}


def heis_auto_apply(beta: HeisAuto, p: HeisPoint) -> HeisPoint:
    return beta.apply(p)


@dataclass(frozen=True)
class HeisAction:
    """ℤ^l-action on the Heisenberg nilmanifold by commuting automorphisms."""

    generators: Tuple[HeisAuto, ...]
    names: Optional[Tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        issues = []
        if not self.generators:
            issues.append("An action needs at least one generator")
        for i in range(len(self.generators)):
            for j in range(i + 1, len(self.generators)):
                one = self.generators[i].compose(self.generators[j])
                two = self.generators[j].compose(self.generators[i])
                if one != two:
                    issues.append(f"Generators {i} and {j} do not commute")
        if issues:
            raise ValidationError(issues)

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "HeisAction":
        names = data.get("names")
        return cls(
            tuple(HeisAuto.from_json(g) for g in data["generators"]),
            tuple(names) if names else None,
        )

    @property
    def rank(self) -> int:
        return len(self.generators)

    def base_action(self) -> ZlAction:
        """The induced action on the base torus G/[G,G]Λ = T²."""
        return ZlAction(tuple(g.block for g in self.generators), self.names)

    def element(self, z: Sequence[int]) -> HeisAuto:
        self._check(z)
        result = HeisAuto.identity()
        for generator, exponent in zip(self.generators, z):
            if exponent:
                result = result.compose(generator ** int(exponent))
        return result

    def word(self, z: Sequence[int]) -> Tuple[HeisAuto, ...]:
        """α(z) as a sequence of generator steps, for applying with reduction in between."""
        self._check(z)
        steps: List[HeisAuto] = []
        for generator, exponent in zip(self.generators, z):
            step = generator if exponent >= 0 else generator.inverse()
            steps.extend([step] * abs(int(exponent)))
        return tuple(steps)

    def _check(self, z: Sequence[int]):
        if len(z) != self.rank:
            raise ValidationError(f"Expected a vector of length {self.rank}, got {len(z)}")

    def to_json(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"generators": [g.to_json() for g in self.generators]}
        if self.names:
            data["names"] = list(self.names)
        return data
