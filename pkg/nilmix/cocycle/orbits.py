"""Orbits of the dual action n ↦ aᵀn through a finite frequency set.

Every nonzero frequency of an ergodic automorphism has an infinite dual orbit
that visits a bounded window only finitely often. A walk stops after
``ORBIT_HORIZON`` consecutive steps outside the window; callers re-verify
their results exactly.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from sympy.polys.domains import QQ_I

from nilmix.algebra.matrices import UnimodularMatrix
from nilmix.conf import get_setting
from nilmix.exceptions import BudgetExceeded, DegenerateInstance
from nilmix.toral.trig import Frequency, TrigPolynomial

logger = logging.getLogger(__name__)


def sup_norm(freq: Sequence[int]) -> int:
    return max((abs(v) for v in freq), default=0)


@dataclass(frozen=True)
class DualOrbit:
    """Consecutive orbit points m_0, m_1 = aᵀm_0, ..., m_L from the first to the last hit."""

    path: Tuple[Frequency, ...]
    # positions along ``path`` that belong to the decomposed set
    hits: Tuple[int, ...]

    @property
    def representative(self) -> Frequency:
        return self.path[0]

    @property
    def segment(self) -> Tuple[Frequency, ...]:
        return tuple(self.path[k] for k in self.hits)

    def coefficients(self, f: TrigPolynomial) -> List[Any]:
        return [f.coefficient(m) for m in self.path]

    def partial_sums(self, f: TrigPolynomial) -> List[Any]:
        """Σ_{j<=k} f̂(m_j) for every position k of the path."""
        sums, total = [], QQ_I.zero
        for c in self.coefficients(f):
            total = total + c
            sums.append(total)
        return sums

    def total(self, f: TrigPolynomial):
        total = QQ_I.zero
        for m in self.segment:
            total = total + f.coefficient(m)
        return total

    def to_json(self) -> Dict[str, Any]:
        return {
            "representative": list(self.representative),
            "length": len(self.path),
            "segment": [list(m) for m in self.segment],
        }


@dataclass
class DualOrbitDecomposition:
    matrix: UnimodularMatrix
    orbits: List[DualOrbit] = field(default_factory=list)
    # the zero frequency is fixed by every automorphism
    contains_zero: bool = False

    def frequencies(self) -> List[Frequency]:
        return [m for orbit in self.orbits for m in orbit.path]

    def to_json(self) -> Dict[str, Any]:
        return {
            "orbits": [orbit.to_json() for orbit in self.orbits],
            "contains_zero": self.contains_zero,
        }


def _walk(start: Frequency, step: UnimodularMatrix, targets: set, radius: int, horizon: int, limit: int):
    """Yield (k, m) for the hits of the orbit of ``start`` under ``step``, k >= 1."""
    current, outside = start, 0
    for k in range(1, limit + 1):
        current = step.apply(current)
        if current == start:
            raise DegenerateInstance(
                "A frequency has a finite dual orbit; the automorphism is not ergodic",
                {"frequency": list(start), "period": k},
            )
        if sup_norm(current) > radius:
            outside += 1
            if outside > horizon:
                return
            continue
        outside = 0
        if current in targets:
            yield k, current
    raise BudgetExceeded(
        "Dual orbit walk did not leave the support window", {"frequency": list(start), "steps": limit}
    )


def dual_orbits(
    freqs: Iterable[Sequence[int]],
    a: UnimodularMatrix,
    horizon: Optional[int] = None,
) -> DualOrbitDecomposition:
    """Partition ``freqs`` into maximal segments of aᵀ-orbits."""
    horizon = int(horizon or get_setting("ORBIT_HORIZON"))
    limit = int(get_setting("ORBIT_STEP_LIMIT"))
    forward = a.transpose()
    backward = forward.inverse()
    remaining = {tuple(int(v) for v in m) for m in freqs}
    decomposition = DualOrbitDecomposition(a)
    zero = (0,) * a.dim
    if zero in remaining:
        remaining.discard(zero)
        decomposition.contains_zero = True
    radius = max((sup_norm(m) for m in remaining), default=0)
    targets = set(remaining)
    for start in sorted(remaining):
        if start not in targets:
            continue
        offsets = {0: start}
        for k, m in _walk(start, backward, targets, radius, horizon, limit):
            offsets[-k] = m
        for k, m in _walk(start, forward, targets, radius, horizon, limit):
            offsets[k] = m
        first, last = min(offsets), max(offsets)
        path = [offsets[first]]
        for _ in range(last - first):
            path.append(forward.apply(path[-1]))
        decomposition.orbits.append(DualOrbit(tuple(path), tuple(sorted(k - first for k in offsets))))
        targets.difference_update(offsets.values())
    logger.debug("%d frequencies split into %d dual orbits", len(remaining), len(decomposition.orbits))
    return decomposition
