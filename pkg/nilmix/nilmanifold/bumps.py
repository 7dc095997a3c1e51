"""Smooth observables on the Heisenberg nilmanifold with closed-form integrals.

Bumps (1 - (r/R)²)^m are supported strictly inside the open fundamental
domain, so they are well defined on the quotient. Base characters depend on
(x, y) only and are periodic.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from django.core.exceptions import ValidationError
from scipy.special import beta

logger = logging.getLogger(__name__)


class HolderFunction:
    """Interface shared by the observables: vectorized values and exact integrals."""

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def integral(self) -> float:
        raise NotImplementedError

    def square_integral(self) -> float:
        raise NotImplementedError

    def sup_norm(self) -> float:
        raise NotImplementedError

    def lipschitz(self) -> float:
        raise NotImplementedError

    def holder_scale(self, theta: float = 1.0) -> float:
        """Upper bound for ‖f‖_{C^θ} in the coordinate metric: sup + Lip^θ (2 sup)^{1-θ}."""
        if not 0 < theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        sup = self.sup_norm()
        return sup + self.lipschitz() ** theta * (2 * sup) ** (1 - theta)

    def to_json(self) -> Dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(HolderFunction):
    value: float = 1.0

    def evaluate(self, points):
        return np.full(np.asarray(points).shape[0], float(self.value))

    def integral(self):
        return float(self.value)

    def square_integral(self):
        return float(self.value) ** 2

    def sup_norm(self):
        return abs(float(self.value))

    def lipschitz(self):
        return 0.0

    def to_json(self):
        return {"constant": self.value}


@dataclass(frozen=True)
class Bump(HolderFunction):
    center: Tuple[float, float, float]
    radius: float
    exponent: int = 3
    amplitude: float = 1.0
    # subtract the mean so that ∫ f = 0
    centered: bool = False

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        issues = []
        if len(self.center) != 3:
            issues.append("A bump center needs three coordinates")
        if self.radius <= 0:
            issues.append("The bump radius must be positive")
        if self.exponent < 3:
            issues.append("The bump exponent must be at least 3")
        if any(c - self.radius <= 0 or c + self.radius >= 1 for c in self.center):
            issues.append(
                f"Bump at {self.center} with radius {self.radius} touches the fundamental-domain boundary"
            )
        if issues:
            raise ValidationError(issues)

    def _raw_integral(self) -> float:
        return self.amplitude * 2 * math.pi * self.radius**3 * beta(1.5, self.exponent + 1)

    def evaluate(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        r2 = np.sum((points - np.array(self.center)) ** 2, axis=1)
        s = np.clip(1.0 - r2 / self.radius**2, 0.0, None)
        values = self.amplitude * s**self.exponent
        if self.centered:
            values = values - self._raw_integral()
        return values

    def integral(self):
        return 0.0 if self.centered else self._raw_integral()

    def square_integral(self):
        raw = self.amplitude**2 * 2 * math.pi * self.radius**3 * beta(1.5, 2 * self.exponent + 1)
        if self.centered:
            return raw - self._raw_integral() ** 2
        return raw

    def sup_norm(self):
        top = abs(self.amplitude)
        if self.centered:
            mean = abs(self._raw_integral())
            return max(top - mean, mean)
        return top

    def lipschitz(self):
        m = self.exponent
        s = 1 / math.sqrt(2 * m - 1)
        return abs(self.amplitude) * (2 * m / self.radius) * s * (1 - s * s) ** (m - 1)

    def to_json(self):
        return {
            "bump": {
                "center": list(self.center),
                "radius": self.radius,
                "exponent": self.exponent,
                "amplitude": self.amplitude,
                "centered": self.centered,
            }
        }


@dataclass(frozen=True)
class BaseCharacter(HolderFunction):
    """amplitude · cos(2π(⟨k, (x, y)⟩ - phase)), a function on the base torus.

    phase = 1/4 gives the sine, the imaginary part of e(⟨k, (x, y)⟩).
    """

    freq: Tuple[int, int]
    amplitude: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "freq", tuple(int(k) for k in self.freq))
        if len(self.freq) != 2 or not any(self.freq):
            raise ValidationError("A base character needs a nonzero frequency in Z^2")

    def evaluate(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        phase = points[:, 0] * self.freq[0] + points[:, 1] * self.freq[1]
        return self.amplitude * np.cos(2 * np.pi * (phase - self.phase))

    def integral(self):
        return 0.0

    def square_integral(self):
        return self.amplitude**2 / 2

    def sup_norm(self):
        return abs(self.amplitude)

    def lipschitz(self):
        return abs(self.amplitude) * 2 * math.pi * math.hypot(*self.freq)

    def to_json(self):
        return {
            "character": {"freq": list(self.freq), "amplitude": self.amplitude, "phase": self.phase}
        }


def function_from_json(data: Dict[str, Any]) -> HolderFunction:
    if "constant" in data:
        return Constant(float(data["constant"]))
    if "bump" in data:
        spec = data["bump"]
        return Bump(
            tuple(spec["center"]),
            float(spec["radius"]),
            int(spec.get("exponent", 3)),
            float(spec.get("amplitude", 1.0)),
            bool(spec.get("centered", False)),
        )
    if "character" in data:
        spec = data["character"]
        return BaseCharacter(
            tuple(spec["freq"]), float(spec.get("amplitude", 1.0)), float(spec.get("phase", 0.0))
        )
    raise ValidationError(f"Unknown test function: {sorted(data)}")


def product_integral(functions: Sequence[HolderFunction]) -> float:
    """∏ ∫ f_i, the value the correlations converge to."""
    result = 1.0
    for f in functions:
        result *= f.integral()
    return result
