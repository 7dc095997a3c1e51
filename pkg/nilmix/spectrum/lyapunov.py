"""The Lyapunov map ℓ(z) = (log|χ(z)|)_χ of a Galois orbit and its sup-norm growth constant."""

import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

from mpmath import iv, mp
from scipy.optimize import linprog
from shapely.geometry import Polygon, box

from nilmix.algebra.intervals import (
    interval_abs,
    lower,
    to_interval,
    upper,
    working_precision,
)
from nilmix.exceptions import DegenerateInstance
from nilmix.spectrum.characters import GaloisOrbit

logger = logging.getLogger(__name__)

# polygon clip radius; reaching it means the region is unbounded
POLYGON_RADIUS = 1.0e6


def log_matrix(orbit: GaloisOrbit, precision: int) -> List[List["iv.mpf"]]:
    """Rows ℓ_χ(e_i) as enclosures, one row per orbit member."""
    return [member.log_moduli(precision) for member in orbit.members]


def lyapunov_map(orbit: GaloisOrbit, z: Sequence[int], precision: int) -> List["iv.mpf"]:
    """Enclosures of log|χ(z)| = Σ_i z_i log|χ(e_i)| for each member of the orbit."""
    if len(z) != orbit.rank:
        raise ValueError(f"Expected a vector of length {orbit.rank}")
    rows = log_matrix(orbit, precision)
    with working_precision(precision + 16):
        return [_dot(row, z) for row in rows]


def _dot(row: Sequence["iv.mpf"], z: Sequence) -> "iv.mpf":
    acc = iv.mpf(0)
    for entry, zi in zip(row, z):
        if zi:
            acc = acc + entry * to_interval(zi)
    return acc


@dataclass
class LyapunovConstant:
    lower: "mp.mpf"
    upper: "mp.mpf"
    # (coordinate index, sign) of the sphere facet attaining the minimum
    facet: Tuple[int, int]
    facet_values: List[Dict] = field(default_factory=list)
    polygon_estimate: Optional[float] = None

    def enclosure(self) -> "iv.mpf":
        return iv.mpf([self.lower, self.upper])


def lemma21_constant(orbit: GaloisOrbit, precision: int, norm: str = "sup") -> LyapunovConstant:
    """c = min over the unit sup-sphere of max_χ ℓ_χ(z), as a certified enclosure.

    Each of the 2l facets {z_k = ±1, |z_i| <= 1} is an epigraph LP. The LP dual
    weights give a certified lower bound and the primal point a certified
    upper bound.
    """
    if norm != "sup":
        raise ValueError(f"Unsupported norm: {norm}")
    l = orbit.rank
    rows = log_matrix(orbit, precision)
    floats = [[float(mp.mpf((lower(v) + upper(v)) / 2)) for v in row] for row in rows]
    facet_values = []
    best = None
    with working_precision(precision + 16):
        for k in range(l):
            for sign in (1, -1):
                lo, hi, z_star = _facet_bounds(rows, floats, k, sign)
                facet_values.append(
                    {"facet": [k, sign], "lower": lo, "upper": hi, "argmin": z_star}
                )
                if best is None or hi < best[1] or (hi == best[1] and lo < best[0]):
                    best = (lo, hi, (k, sign))
        c_lower = min(entry["lower"] for entry in facet_values)
        c_upper = min(entry["upper"] for entry in facet_values)
    if c_lower <= 0:
        raise DegenerateInstance(
            "The Lyapunov constant enclosure touches 0",
            {"lower": str(c_lower), "upper": str(c_upper)},
        )
    result = LyapunovConstant(c_lower, c_upper, best[2], facet_values)
    if l == 2:
        result.polygon_estimate = polygon_constant(floats)
    logger.debug("Lyapunov constant in [%s, %s]", mp.nstr(c_lower, 12), mp.nstr(c_upper, 12))
    return result


def _facet_bounds(rows, floats, k: int, sign: int):
    l = len(floats[0])
    objective = [0.0] * l + [1.0]
    a_ub = [row + [-1.0] for row in floats]
    b_ub = [0.0] * len(floats)
    bounds = [(-1.0, 1.0)] * l + [(None, None)]
    bounds[k] = (float(sign), float(sign))
    res = linprog(objective, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise DegenerateInstance(f"Facet LP failed: {res.message}")

    # dual weights y >= 0: min over the facet of y·ℓ(z) / Σy bounds c from below
    weights = [max(0.0, -float(m)) for m in res.ineqlin.marginals]
    total = sum(weights)
    if total <= 0:
        weights = [1.0] * len(rows)
        total = float(len(rows))
    g = [iv.mpf(0)] * l
    for weight, row in zip(weights, rows):
        if weight:
            for i in range(l):
                g[i] = g[i] + row[i] * iv.mpf(weight)
    bound = g[k] * sign
    for i in range(l):
        if i != k:
            bound = bound - interval_abs(g[i])
    bound = bound / iv.mpf(total)

    # primal point on the facet bounds c from above
    z_star = [min(1.0, max(-1.0, float(v))) for v in res.x[:l]]
    z_star[k] = float(sign)
    values = [sum((row[i] * iv.mpf(z_star[i]) for i in range(l)), iv.mpf(0)) for row in rows]
    top = max(upper(v) for v in values)
    return lower(bound), top, z_star


def polygon_constant(floats: Sequence[Sequence[float]]) -> float:
    """Floating cross-check for l = 2: 1 / max sup-norm over {z : ℓ_χ(z) <= 1 for all χ}."""
    region = box(-POLYGON_RADIUS, -POLYGON_RADIUS, POLYGON_RADIUS, POLYGON_RADIUS)
    for a, b in floats:
        size = (a * a + b * b) ** 0.5
        if size == 0:
            continue
        nx, ny = a / size, b / size
        px, py = nx / size, ny / size
        tx, ty = -ny, nx
        far = 4 * POLYGON_RADIUS
        halfplane = Polygon(
            [
                (px + far * tx, py + far * ty),
                (px - far * tx, py - far * ty),
                (px - far * tx - far * nx, py - far * ty - far * ny),
                (px + far * tx - far * nx, py + far * ty - far * ny),
            ]
        )
        region = region.intersection(halfplane)
    if region.is_empty:
        return 0.0
    radius = max(max(abs(x), abs(y)) for x, y in region.exterior.coords)
    if radius >= POLYGON_RADIUS * (1 - 1e-9):
        return 0.0
    return 1.0 / radius


def orbit_log_sum(orbit: GaloisOrbit, z: Sequence[int], precision: int) -> "iv.mpf":
    """Σ_χ log|χ(z)| over the orbit; encloses log|N(χ(z))| (0 for units)."""
    with working_precision(precision + 16):
        total = iv.mpf(0)
        for value in lyapunov_map(orbit, z, precision):
            total = total + value
        return total


def verify_growth(
    orbit: GaloisOrbit, constant: LyapunovConstant, radius: int, precision: int
) -> List[Tuple[int, ...]]:
    """Integer z with 0 < ‖z‖∞ <= radius where max_χ ℓ_χ(z) >= (c - ε)‖z‖∞ fails.

    ε is 2^{16-precision}, the slack allowed for enclosure widths.
    """
    rows = log_matrix(orbit, precision)
    failures = []
    with working_precision(precision + 16):
        slack = constant.lower - mp.mpf(2) ** (16 - precision)
        for z in _ball(orbit.rank, radius):
            size = max(abs(v) for v in z)
            top = max(lower(_dot(row, z)) for row in rows)
            if top < slack * size:
                failures.append(z)
    return failures


def _ball(rank: int, radius: int):
    for z in product(range(-radius, radius + 1), repeat=rank):
        if any(z):
            yield z
