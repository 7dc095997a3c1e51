"""Simultaneous eigenvalue systems (characters) of a Z^l-action and their Galois orbits."""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy import ZZ
from sympy.polys.matrices import DomainMatrix

from nilmix.algebra.intervals import CertifiedComplex, working_precision
from nilmix.algebra.numberfield import NumberField, NumberFieldElement, nf_embeddings, nullspace
from nilmix.algebra.polynomials import IntPolynomial
from nilmix.conf import get_setting
from nilmix.exceptions import UnsupportedInput
from nilmix.spectrum.action import ZlAction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Character:
    """χ(e_i) = values[i], realized in the complex embedding ``embedding_index`` of the field."""

    values: Tuple[NumberFieldElement, ...]
    embedding_index: int
    factor: IntPolynomial
    copy: int
    eigenvector: Tuple[NumberFieldElement, ...]

    @property
    def field(self) -> NumberField:
        return self.values[0].field

    @property
    def rank(self) -> int:
        return len(self.values)

    def value(self, z: Sequence[int]) -> NumberFieldElement:
        """Exact χ(z) = ∏ values_i^{z_i}."""
        result = self.field.one()
        for u, exponent in zip(self.values, z):
            if exponent:
                result = result * u ** int(exponent)
        return result

    def embed(self, z: Sequence[int], precision: int) -> CertifiedComplex:
        return nf_embeddings(self.value(z), precision)[self.embedding_index]

    def log_moduli(self, precision: int):
        """Enclosures of log|χ(e_i)| for each generator."""
        return [log_modulus(u, self.embedding_index, precision) for u in self.values]

    def to_json(self) -> Dict:
        return {
            "field": self.factor.to_json(),
            "embedding_index": self.embedding_index,
            "copy": self.copy,
            "values": [u.to_json() for u in self.values],
            "eigenvector": [v.to_json() for v in self.eigenvector],
        }


@dataclass(frozen=True)
class GaloisOrbit:
    members: Tuple[Character, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError("A Galois orbit cannot be empty")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def rank(self) -> int:
        return self.members[0].rank

    @property
    def factor(self) -> IntPolynomial:
        return self.members[0].factor

    def values(self) -> Tuple[NumberFieldElement, ...]:
        return self.members[0].values


@lru_cache(maxsize=4096)
def log_modulus(u: NumberFieldElement, index: int, precision: int):
    embedding = nf_embeddings(u, precision)[index]
    with working_precision(precision + 16):
        return embedding.log_modulus()


def _combination(action: ZlAction, coefficients: Sequence[int]) -> List[List[int]]:
    d = action.dim
    rows = [[0] * d for _ in range(d)]
    for c, generator in zip(coefficients, action.generators):
        for i in range(d):
            for j in range(d):
                rows[i][j] += int(c) * generator.entries[i][j]
    return rows


def _apply(
    matrix: Sequence[Sequence[int]], vector: Sequence[NumberFieldElement]
) -> List[NumberFieldElement]:
    result = []
    for row in matrix:
        acc = vector[0].field.zero()
        for a, v in zip(row, vector):
            if a:
                acc = acc + v * a
        result.append(acc)
    return result


def _scalar_on(
    matrix: Sequence[Sequence[int]], basis: Sequence[Sequence[NumberFieldElement]]
) -> Optional[NumberFieldElement]:
    """The scalar by which ``matrix`` acts on span(basis), or None if it is not scalar there."""
    first = basis[0]
    pivot = next(k for k, v in enumerate(first) if not v.is_zero)
    image = _apply(matrix, first)
    scalar = image[pivot] / first[pivot]
    for vector in basis:
        image = _apply(matrix, vector)
        if any(not (w - v * scalar).is_zero for w, v in zip(image, vector)):
            return None
    return scalar


def _split(action: ZlAction, coefficients: Sequence[int]) -> Optional[List[Character]]:
    """Characters from the eigenspaces of Σ c_i A_i, or None when that combination does not separate them."""
    combination = _combination(action, coefficients)
    charpoly = DomainMatrix(
        [[ZZ(v) for v in row] for row in combination], (action.dim, action.dim), ZZ
    ).charpoly()
    characters: List[Character] = []
    for factor, multiplicity in IntPolynomial(tuple(int(c) for c in charpoly)).factor():
        field = NumberField(factor)
        theta = field.theta()
        shifted = [
            [field.rational(v) - theta if i == j else field.rational(v) for j, v in enumerate(row)]
            for i, row in enumerate(combination)
        ]
        basis = nullspace(shifted)
        if len(basis) < multiplicity:
            raise UnsupportedInput(
                "The action is not semisimple",
                {"factor": factor.to_json(), "multiplicity": multiplicity, "kernel": len(basis)},
            )
        values = []
        for generator in action.generators:
            scalar = _scalar_on(generator.entries, basis)
            if scalar is None:
                return None
            values.append(scalar)
        for copy, vector in enumerate(basis):
            for index in range(field.degree):
                characters.append(
                    Character(tuple(values), index, factor, copy, tuple(vector))
                )
    return characters


def simultaneous_spectrum(
    action: ZlAction, precision: Optional[int] = None, seed: Optional[int] = None
) -> List[Character]:
    """All d characters of the action, with multiplicity.

    With ``precision`` set, every character value is also certified to embed at
    that precision (raising PrecisionExhausted otherwise).

    The first attempt splits with the first generator alone; later attempts use
    random integer combinations with coefficients bounded by
    ``SPLIT_COEFFICIENT_BOUND``.
    """
    characters = list(
        _spectrum(action, get_setting("SPLIT_SEED") if seed is None else int(seed))
    )
    if precision is not None:
        for character in characters:
            for u in character.values:
                nf_embeddings(u, precision)
    return characters


@lru_cache(maxsize=64)
def _spectrum(action: ZlAction, seed: int) -> Tuple[Character, ...]:
    rng = np.random.default_rng(seed)
    bound = get_setting("SPLIT_COEFFICIENT_BOUND")
    retries = get_setting("SPLIT_RETRIES")
    coefficients: Tuple[int, ...] = (1,) + (0,) * (action.rank - 1)
    for attempt in range(retries + 1):
        characters = _split(action, coefficients)
        if characters is not None:
            logger.debug("Split the action with coefficients %s", coefficients)
            return tuple(characters)
        logger.debug("Combination %s does not split the action (attempt %d)", coefficients, attempt)
        coefficients = (0,) * action.rank
        while not any(coefficients):
            coefficients = tuple(int(c) for c in rng.integers(-bound, bound, size=action.rank, endpoint=True))
    raise UnsupportedInput(
        f"No splitting combination found after {retries} retries", {"action": action.to_json()}
    )


def galois_orbits(characters: Sequence[Character]) -> List[GaloisOrbit]:
    """Partition characters by (splitting factor, eigenspace copy)."""
    groups: Dict[Tuple, List[Character]] = {}
    for character in characters:
        groups.setdefault((character.factor, character.copy), []).append(character)
    return [
        GaloisOrbit(tuple(sorted(members, key=lambda c: c.embedding_index)))
        for members in groups.values()
    ]
