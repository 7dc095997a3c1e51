"""Ergodicity and Anosov certificates for Z^l-actions."""

import logging
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Any, Dict, List, Optional, Sequence, Tuple

from mpmath import iv, mp
from sympy import ZZ
from sympy.polys.matrices import DomainMatrix

from nilmix.algebra.intervals import contains_zero, lower, midpoint, upper, working_precision
from nilmix.algebra.polynomials import has_root_on_unit_circle
from nilmix.conf import get_setting
from nilmix.exceptions import CertificationUndecided
from nilmix.spectrum.action import ZlAction
from nilmix.spectrum.characters import Character, GaloisOrbit, galois_orbits, simultaneous_spectrum
from nilmix.spectrum.lyapunov import log_matrix

logger = logging.getLogger(__name__)


@dataclass
class OrbitCertificate:
    factor: List[str]
    method: str
    precision: int
    candidates_checked: int = 0


@dataclass
class ErgodicityCertificate:
    """Ergodicity verdict per Galois orbit.

    A counterexample records a z with every χ(z) of one orbit a root of unity
    of the given ``order``, so α(z) is not ergodic, and ``trivial_power`` =
    order·z, on which that orbit's characters equal 1. For -I this reads
    z = [1], since α(1) = -I already fails, with trivial_power [2] and
    α(2) = I.
    """

    ergodic: bool
    orbits: List[OrbitCertificate] = field(default_factory=list)
    counterexample: Optional[Dict[str, Any]] = None

    def to_json(self) -> Dict[str, Any]:
        return {
            "ergodic": self.ergodic,
            "orbits": [vars(o) for o in self.orbits],
            "counterexample": self.counterexample,
        }


def _interval_det(matrix: Sequence[Sequence["iv.mpf"]]) -> "iv.mpf":
    n = len(matrix)
    if n == 1:
        return matrix[0][0]
    total = iv.mpf(0)
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in matrix[1:]]
        term = matrix[0][j] * _interval_det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def _rank_certified(rows: Sequence[Sequence["iv.mpf"]], rank: int) -> bool:
    """True when some rank×rank minor of the log matrix excludes 0."""
    if len(rows) < rank:
        return False
    for chosen in combinations(range(len(rows)), rank):
        if not contains_zero(_interval_det([rows[i] for i in chosen])):
            return True
    return False


def _kernel_candidates(rows, rank: int, bits: int, radius: int) -> List[Tuple[int, ...]]:
    """Short integer vectors z with ℓ(z) small: LLL on [I | W·ℓ(e_i)] plus a small ball."""
    weight = mp.mpf(2) ** (bits // 2)
    basis = []
    for i in range(rank):
        scaled = [int(mp.nint(weight * midpoint(row[i]))) for row in rows]
        basis.append([ZZ(int(i == j)) for j in range(rank)] + [ZZ(v) for v in scaled])
    reduced = DomainMatrix(basis, (rank, rank + len(rows)), ZZ).lll()
    candidates = []
    for row in reduced.to_list():
        z = tuple(int(v) for v in row[:rank])
        if any(z):
            candidates.append(_canonical(z))
    for z in product(range(-radius, radius + 1), repeat=rank):
        if any(z):
            candidates.append(_canonical(z))
    return sorted(set(candidates), key=lambda z: (max(abs(v) for v in z), z))


def _canonical(z: Tuple[int, ...]) -> Tuple[int, ...]:
    first = next(v for v in z if v)
    return z if first > 0 else tuple(-v for v in z)


def _root_of_unity_relation(orbit: GaloisOrbit, z: Tuple[int, ...]) -> Optional[int]:
    return orbit.members[0].value(z).root_of_unity_order()


def ergodicity_certificate(
    action: ZlAction, precision: Optional[int] = None, seed: Optional[int] = None
) -> ErgodicityCertificate:
    """Certify that ker ℓ ∩ Z^l = {0} on every Galois orbit, or return a counterexample."""
    precision = precision or get_setting("PRECISION_BITS")
    cap = get_setting("PRECISION_CAP_BITS")
    radius = get_setting("KERNEL_SEARCH_RADIUS")
    orbits = galois_orbits(simultaneous_spectrum(action, seed=seed))
    certificate = ErgodicityCertificate(ergodic=True)
    for orbit in orbits:
        bits = precision
        checked = set()
        while True:
            rows = log_matrix(orbit, bits)
            with working_precision(bits + 16):
                if _rank_certified(rows, action.rank):
                    certificate.orbits.append(
                        OrbitCertificate(orbit.factor.to_json(), "rank", bits, len(checked))
                    )
                    break
                candidates = _kernel_candidates(rows, action.rank, bits, radius)
            for z in candidates:
                if z in checked:
                    continue
                checked.add(z)
                order = _root_of_unity_relation(orbit, z)
                if order is not None:
                    certificate.ergodic = False
                    certificate.orbits.append(
                        OrbitCertificate(orbit.factor.to_json(), "kernel_search", bits, len(checked))
                    )
                    certificate.counterexample = {
                        "z": list(z),
                        "order": order,
                        "trivial_power": [order * v for v in z],
                        "factor": orbit.factor.to_json(),
                    }
                    logger.info("Action is not totally ergodic: z=%s, order %d", z, order)
                    return certificate
            if bits * 2 > cap:
                raise CertificationUndecided(
                    "Could neither certify full rank nor find a kernel vector",
                    {"factor": orbit.factor.to_json(), "candidates": [list(z) for z in sorted(checked)]},
                )
            logger.debug("Rank not certified at %d bits; doubling", bits)
            bits *= 2
    return certificate


@dataclass
class AnosovResult:
    anosov: bool
    witness: Optional[Dict[str, Any]] = None
    method: str = "enclosure"

    def to_json(self) -> Dict[str, Any]:
        return {"anosov": self.anosov, "witness": self.witness, "method": self.method}


def _modulus_may_be_one(character: Character, z: Sequence[int], precision: int) -> bool:
    embedded = character.embed(z, precision)
    with working_precision(precision + 16):
        modulus = embedded.modulus_squared()
        return lower(modulus) <= 1 <= upper(modulus)


def anosov_check(
    action: ZlAction, z: Sequence[int], precision: Optional[int] = None
) -> AnosovResult:
    """Decide whether α(z) has no eigenvalue of modulus 1."""
    if not any(z):
        raise ValueError("anosov_check needs z != 0")
    precision = precision or get_setting("PRECISION_BITS")
    method = "enclosure"
    for orbit in galois_orbits(simultaneous_spectrum(action)):
        suspects = [c for c in orbit.members if _modulus_may_be_one(c, z, precision)]
        if not suspects:
            continue
        method = "exact"
        minpoly = orbit.members[0].value(z).minpoly()
        if has_root_on_unit_circle(minpoly):
            witness = suspects[0]
            return AnosovResult(
                False,
                {
                    "factor": orbit.factor.to_json(),
                    "embedding_index": witness.embedding_index,
                    "minpoly": minpoly.to_json(),
                },
                method,
            )
    return AnosovResult(True, None, method)


def shape_is_anosov(
    action: ZlAction, shape: Sequence[Sequence[int]], precision: Optional[int] = None
) -> Tuple[bool, List[Dict[str, Any]]]:
    """Every pairwise quotient α(z_i - z_j), i != j, is Anosov."""
    failures = []
    for i, j in combinations(range(len(shape)), 2):
        difference = [a - b for a, b in zip(shape[i], shape[j])]
        result = anosov_check(action, difference, precision)
        if not result.anosov:
            failures.append({"pair": [i, j], "witness": result.witness})
    return not failures, failures
