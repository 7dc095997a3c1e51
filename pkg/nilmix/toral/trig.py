"""Trigonometric polynomials on T^d with exact Gaussian-rational coefficients.

A :class:`TrigPolynomial` stands for f(x) = Σ_a c_a e(⟨a, x⟩), e(t) = exp(2πit),
possibly plus an unknown remainder whose ℓ¹ Fourier mass is at most
``tail_bound``. Truncated Hölder functions carry their omitted mass there.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from mpmath import iv
from sympy import QQ
from sympy.polys.domains import QQ_I

from nilmix.algebra.intervals import (
    interval_abs,
    midpoint,
    mpf_to_fraction,
    to_interval,
    upper,
    working_precision,
)
from nilmix.algebra.matrices import UnimodularMatrix

logger = logging.getLogger(__name__)

Frequency = Tuple[int, ...]


def rational(value) -> "QQ":
    if isinstance(value, str):
        value = Fraction(value)
    elif not isinstance(value, (Fraction, float)):
        # ints and sympy QQ elements
        value = Fraction(int(value.numerator), int(value.denominator))
    value = Fraction(value)
    return QQ(value.numerator, value.denominator)


def to_fraction(value) -> Fraction:
    return Fraction(int(value.numerator), int(value.denominator))


def gaussian(re=0, im=0):
    """Exact complex rational re + i·im."""
    return QQ_I(rational(re), rational(im))


def conjugate(c):
    return QQ_I(c.x, -c.y)


def _upper_fraction(value: "iv.mpf") -> Fraction:
    return mpf_to_fraction(upper(value))


def modulus(c) -> "iv.mpf":
    return iv.sqrt(to_interval(c.x) ** 2 + to_interval(c.y) ** 2)


@dataclass(frozen=True)
class TrigPolynomial:
    dim: int
    coeffs: Dict[Frequency, Any] = field(default_factory=dict)
    tail_bound: Fraction = Fraction(0)
    holder_norm_hint: Optional[float] = None

    def __post_init__(self):
        cleaned = {}
        for freq, c in self.coeffs.items():
            freq = tuple(int(v) for v in freq)
            if len(freq) != self.dim:
                raise ValueError(f"Frequency {freq} does not have dimension {self.dim}")
            if not isinstance(c, type(QQ_I.one)):
                c = gaussian(c)
            if c:
                cleaned[freq] = c
        object.__setattr__(self, "coeffs", dict(sorted(cleaned.items())))
        object.__setattr__(self, "tail_bound", Fraction(self.tail_bound))
        if self.tail_bound < 0:
            raise ValueError("tail_bound must be nonnegative")

    @classmethod
    def constant(cls, dim: int, value=1) -> "TrigPolynomial":
        return cls(dim, {(0,) * dim: gaussian(value)})

    @classmethod
    def character(cls, freq: Sequence[int], coefficient=1) -> "TrigPolynomial":
        """c · e(⟨freq, x⟩)."""
        return cls(len(freq), {tuple(freq): gaussian(coefficient)})

    @classmethod
    def cosine(cls, freq: Sequence[int], amplitude=1) -> "TrigPolynomial":
        """amplitude · cos(2π⟨freq, x⟩)."""
        half = gaussian(Fraction(amplitude) / 2)
        negative = tuple(-v for v in freq)
        if tuple(freq) == negative:
            return cls.constant(len(freq), amplitude)
        return cls(len(freq), {tuple(freq): half, negative: half})

    @classmethod
    def lacunary(
        cls, base: Sequence[Sequence[int]], theta, radius: int, precision: int = 64
    ) -> "TrigPolynomial":
        """Σ_a Σ_j 2^{-jθ} cos(2π⟨2^j a, x⟩), truncated to frequencies with ‖·‖∞ <= radius.

        The weights 2^{-jθ} are rounded to dyadic rationals; the rounding error
        and the omitted terms j > J are both charged to ``tail_bound``.
        """
        if not base:
            raise ValueError("lacunary needs at least one base frequency")
        dim = len(base[0])
        theta = Fraction(str(theta)) if isinstance(theta, float) else Fraction(theta)
        if not 0 < theta <= 1:
            raise ValueError("The Hölder exponent must lie in (0, 1]")
        coeffs: Dict[Frequency, Any] = {}
        tail = iv.mpf(0)
        with working_precision(precision + 16):
            decay = iv.mpf(2) ** (-to_interval(theta))
            for a in base:
                a = tuple(int(v) for v in a)
                if not any(a):
                    raise ValueError("Base frequencies must be nonzero")
                j = 0
                while max(abs(v) for v in a) * 2**j <= radius:
                    weight = decay**j
                    half = mpf_to_fraction(midpoint(weight / 2))
                    tail = tail + 2 * interval_abs(weight / 2 - to_interval(half))
                    for freq in ((v * 2**j for v in a), (-v * 2**j for v in a)):
                        key = tuple(freq)
                        coeffs[key] = coeffs.get(key, QQ_I.zero) + gaussian(half)
                    j += 1
                # omitted mass Σ_{k>=j} 2^{-kθ}
                tail = tail + decay**j / (1 - decay)
            sup_bound = float(upper(len(base) / (1 - decay)))
        return cls(dim, coeffs, _upper_fraction(tail), sup_bound)

    @property
    def support(self) -> Tuple[Frequency, ...]:
        return tuple(self.coeffs)

    @property
    def is_exact(self) -> bool:
        return self.tail_bound == 0

    def coefficient(self, freq: Sequence[int]):
        return self.coeffs.get(tuple(freq), QQ_I.zero)

    def mean(self):
        """∫ f over T^d, exact for the polynomial part."""
        return self.coefficient((0,) * self.dim)

    def support_radius(self) -> int:
        return max((max(abs(v) for v in a) for a in self.coeffs), default=0)

    def is_real(self) -> bool:
        return all(
            self.coefficient(tuple(-v for v in a)) == conjugate(c)
            for a, c in self.coeffs.items()
        )

    def l1_mass(self) -> "iv.mpf":
        total = iv.mpf(0)
        for c in self.coeffs.values():
            total = total + modulus(c)
        return total

    def _check_dim(self, other: "TrigPolynomial"):
        if other.dim != self.dim:
            raise ValueError(f"Dimension mismatch: {self.dim} and {other.dim}")

    def pullback(self, m: UnimodularMatrix) -> "TrigPolynomial":
        """f ∘ m: the coefficient at a moves to mᵀa."""
        if m.dim != self.dim:
            raise ValueError(f"Dimension mismatch: {self.dim} and matrix of size {m.dim}")
        transpose = m.transpose()
        return TrigPolynomial(
            self.dim,
            {transpose.apply(a): c for a, c in self.coeffs.items()},
            self.tail_bound,
            self.holder_norm_hint,
        )

    def add(self, other: "TrigPolynomial") -> "TrigPolynomial":
        self._check_dim(other)
        coeffs = dict(self.coeffs)
        for a, c in other.coeffs.items():
            coeffs[a] = coeffs.get(a, QQ_I.zero) + c
        return TrigPolynomial(self.dim, coeffs, self.tail_bound + other.tail_bound)

    def scale(self, value) -> "TrigPolynomial":
        factor = value if isinstance(value, type(QQ_I.one)) else gaussian(value)
        with working_precision(64):
            tail = _upper_fraction(to_interval(self.tail_bound) * modulus(factor))
        return TrigPolynomial(
            self.dim, {a: c * factor for a, c in self.coeffs.items()}, tail
        )

    def conjugate(self) -> "TrigPolynomial":
        """The complex conjugate function: c_a moves to -a conjugated."""
        return TrigPolynomial(
            self.dim,
            {tuple(-v for v in a): conjugate(c) for a, c in self.coeffs.items()},
            self.tail_bound,
            self.holder_norm_hint,
        )

    def product(self, other: "TrigPolynomial") -> "TrigPolynomial":
        """Pointwise product: exact convolution of the coefficients."""
        self._check_dim(other)
        coeffs: Dict[Frequency, Any] = {}
        for a, c in self.coeffs.items():
            for b, d in other.coeffs.items():
                key = tuple(x + y for x, y in zip(a, b))
                coeffs[key] = coeffs.get(key, QQ_I.zero) + c * d
        tail = Fraction(0)
        if self.tail_bound or other.tail_bound:
            with working_precision(64):
                mine, theirs = self.l1_mass(), other.l1_mass()
                bound = to_interval(self.tail_bound) * (theirs + to_interval(other.tail_bound))
                bound = bound + to_interval(other.tail_bound) * mine
                tail = _upper_fraction(bound)
        return TrigPolynomial(self.dim, coeffs, tail)

    def evaluate(self, points) -> np.ndarray:
        """Floating values of the polynomial part at an (n, d) array of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.coeffs:
            return np.zeros(points.shape[0], dtype=complex)
        freqs = np.array(self.support, dtype=float)
        weights = np.array(
            [complex(float(to_fraction(c.x)), float(to_fraction(c.y))) for c in self.coeffs.values()]
        )
        return np.exp(2j * np.pi * points @ freqs.T) @ weights

    def to_json(self) -> Dict[str, Any]:
        return {
            "dim": self.dim,
            "coeffs": [
                {"freq": list(a), "re": str(to_fraction(c.x)), "im": str(to_fraction(c.y))}
                for a, c in self.coeffs.items()
            ],
            "tail": str(self.tail_bound),
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "TrigPolynomial":
        if "lacunary" in data:
            spec = data["lacunary"]
            return cls.lacunary(spec["base"], spec["theta"], int(spec["radius"]))
        coeffs = {
            tuple(entry["freq"]): gaussian(entry.get("re", 0), entry.get("im", 0))
            for entry in data.get("coeffs", [])
        }
        return cls(int(data["dim"]), coeffs, Fraction(str(data.get("tail", 0))))


def merge(functions: Iterable[TrigPolynomial]) -> TrigPolynomial:
    """Pointwise product of several functions."""
    functions = list(functions)
    result = functions[0]
    for f in functions[1:]:
        result = result.product(f)
    return result
