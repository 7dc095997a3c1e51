import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from django.core.exceptions import ValidationError

from nilmix.algebra.matrices import UnimodularMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ZlAction:
    """Z^l-action on T^d given by commuting unimodular generators."""

    generators: Tuple[UnimodularMatrix, ...]
    names: Optional[Tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        generators = tuple(
            g if isinstance(g, UnimodularMatrix) else UnimodularMatrix(g)
            for g in self.generators
        )
        object.__setattr__(self, "generators", generators)
        issues = ActionValidator.validate_generators(generators)
        if issues:
            raise ValidationError(issues)

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "ZlAction":
        generators = tuple(UnimodularMatrix(tuple(map(tuple, g))) for g in data["generators"])
        rank = data.get("rank", len(generators))
        if rank != len(generators):
            raise ValidationError(f"rank {rank} does not match {len(generators)} generators")
        names = data.get("names")
        return cls(generators, tuple(names) if names else None)

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def dim(self) -> int:
        return self.generators[0].dim

    def element(self, z: Sequence[int]) -> UnimodularMatrix:
        """α(z) = A_1^{z_1} ··· A_l^{z_l}."""
        if len(z) != self.rank:
            raise ValidationError(f"Expected a vector of length {self.rank}, got {len(z)}")
        result = UnimodularMatrix.identity(self.dim)
        for generator, exponent in zip(self.generators, z):
            if exponent:
                result = result @ generator ** int(exponent)
        return result

    def to_json(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "rank": self.rank,
            "generators": [g.to_json() for g in self.generators],
        }
        if self.names:
            data["names"] = list(self.names)
        return data


class ActionValidator:
    """Checks on action data that report instead of raising"""

    @staticmethod
    def validate_generators(generators: Sequence[UnimodularMatrix]) -> List[str]:
        issues = []
        if not generators:
            return ["An action needs at least one generator"]
        dims = {g.dim for g in generators}
        if len(dims) > 1:
            issues.append(f"Generators have different dimensions: {sorted(dims)}")
            return issues
        for i in range(len(generators)):
            for j in range(i + 1, len(generators)):
                if not generators[i].commutes_with(generators[j]):
                    issues.append(f"Generators {i} and {j} do not commute")
        return issues

    @staticmethod
    def validate_shape(action: ZlAction, z_list: Sequence[Sequence[int]]) -> List[str]:
        issues = []
        for index, z in enumerate(z_list):
            if len(z) != action.rank:
                issues.append(f"z[{index}] has length {len(z)}, expected {action.rank}")
        if len({tuple(z) for z in z_list}) != len(z_list):
            issues.append("Shape vectors must be pairwise distinct")
        return issues
