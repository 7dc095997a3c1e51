"""Lower bounds for |u_1^{z_1} ··· u_l^{z_l} u - 1| and their calibration.

The closed-form bound exp(-c1 · X · log(c3 ‖z‖ / X)), X = log(c2 H(u)), is the
quantity under test. The constant chain from Waldschmidt's linear-forms
estimate is evaluated alongside it with u_0 = -1 and log u_0 = πi.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Any, Dict, List, Optional, Sequence, Tuple

from mpmath import iv, mp

from nilmix.algebra.intervals import (
    certainly_leq,
    certainly_less,
    decimal_bounds,
    interval_max,
    lower,
    to_interval,
    upper,
    working_precision,
)
from nilmix.algebra.matrices import rational_rank
from nilmix.algebra.numberfield import NumberFieldElement
from nilmix.conf import get_setting
from nilmix.diophantine.heights import height
from nilmix.exceptions import (
    CertificationUndecided,
    DegenerateInstance,
    FieldMismatch,
    PrecisionExhausted,
)

logger = logging.getLogger(__name__)

# bisection steps of the c1 calibration
CALIBRATION_STEPS = 48


def _constant(value) -> "iv.mpf":
    if value == "e":
        return +iv.e
    if isinstance(value, str):
        value = Fraction(value)
    return to_interval(value)


def resolve_params(params: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """WALDSCHMIDT defaults overridden by ``params``."""
    merged = get_setting("WALDSCHMIDT")
    merged.update(params or {})
    for name in ("c", "c1", "c2", "c3"):
        if lower(_constant(merged[name])) <= 0:
            raise DegenerateInstance(f"Parameter {name} must be positive", {name: str(merged[name])})
    return merged


def _fmt(value: "iv.mpf") -> List[str]:
    return list(decimal_bounds(value))


def _check_fields(u_list: Sequence[NumberFieldElement], u: NumberFieldElement):
    for w in u_list:
        if w.field != u.field:
            raise FieldMismatch(f"Elements live in different fields: {w.field} and {u.field}")


def product_value(
    u_list: Sequence[NumberFieldElement], u: NumberFieldElement, z: Sequence[int]
) -> NumberFieldElement:
    """Exact ∏ u_i^{z_i} · u."""
    _check_fields(u_list, u)
    if len(z) != len(u_list):
        raise ValueError(f"Expected {len(u_list)} exponents, got {len(z)}")
    result = u
    for w, exponent in zip(u_list, z):
        if exponent:
            result = result * w ** int(exponent)
    return result


def generated_degree(elements: Sequence[NumberFieldElement]) -> int:
    """[Q(elements) : Q], as the dimension of the Q-algebra they generate."""
    field_ = elements[0].field
    basis = [field_.one()]
    frontier = [field_.one()]
    while frontier:
        grown = []
        for b in frontier:
            for w in elements:
                candidate = b * w
                if rational_rank([v.coords for v in basis + [candidate]]) > len(basis):
                    basis.append(candidate)
                    grown.append(candidate)
        frontier = grown
    return len(basis)


@dataclass
class WaldschmidtChain:
    D: int
    A: List["iv.mpf"]
    B: "iv.mpf"
    A_max: "iv.mpf"
    M: "iv.mpf"
    Z0: "iv.mpf"
    G0: "iv.mpf"
    U0: "iv.mpf"
    z0: int
    # Σ|log u_i|/log A_i + |log u|/log B <= (l+2)D/e
    auxiliary_holds: bool
    # exp(-c1 log c2 log c3) <= 1/2
    largeness_holds: bool
    params: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> Dict[str, Any]:
        return {
            "D": self.D,
            "A": [_fmt(a) for a in self.A],
            "B": _fmt(self.B),
            "A_max": _fmt(self.A_max),
            "M": _fmt(self.M),
            "Z0": _fmt(self.Z0),
            "G0": _fmt(self.G0),
            "U0": _fmt(self.U0),
            "z0": self.z0,
            "auxiliary_holds": self.auxiliary_holds,
            "largeness_holds": self.largeness_holds,
            "params": {k: str(v) for k, v in self.params.items() if k != "A"},
        }


def _principal_log(value) -> Tuple["iv.mpf", "iv.mpf"]:
    return value.log_modulus(), value.argument()


def _log_size(log_modulus: "iv.mpf", argument: "iv.mpf") -> "iv.mpf":
    return iv.sqrt(log_modulus**2 + argument**2)


def _pi_multiple(total: NumberFieldElement, logs, z: Sequence[int], embedding: int, bits: int) -> int:
    """Even z_0 with z_0·πi + Σ z_i Log u_i + Log u = Log(∏ u_i^{z_i} u)."""
    arg_total = total.embeddings(bits)[embedding].argument()
    residual = arg_total - logs[-1][1]
    for (_, argument), exponent in zip(logs[:-1], z):
        if exponent:
            residual = residual - argument * exponent
    k = residual / (2 * iv.pi)
    candidates = range(int(mp.ceil(lower(k))), int(mp.floor(upper(k))) + 1)
    if len(candidates) != 1:
        raise CertificationUndecided(
            "The πi multiple of the linear form is not determined",
            {"enclosure": _fmt(k)},
        )
    return 2 * candidates[0]


def _size_condition(h_u, z: Sequence[int], params: Dict[str, Any]):
    """B = c2·H(u) and log B; raises unless B >= e and ‖z‖∞ >= log B may hold."""
    e = +iv.e
    B = _constant(params["c2"]) * h_u.value
    if certainly_less(B, e):
        raise DegenerateInstance("B = c2·H(u) is below e", {"B": _fmt(B)})
    log_B = iv.ln(interval_max(B, e))
    if max((abs(int(v)) for v in z), default=0) < lower(log_B):
        raise DegenerateInstance(
            "‖z‖∞ < log(c2·H(u))", {"z": list(z), "log_B": _fmt(log_B)}
        )
    return B, log_B


def waldschmidt_chain(
    u_list: Sequence[NumberFieldElement],
    u: NumberFieldElement,
    z: Sequence[int],
    params: Optional[Dict[str, Any]] = None,
    precision: Optional[int] = None,
    embedding: int = 0,
) -> WaldschmidtChain:
    """Evaluate D, A_0..A_l, B, A, M, Z0, G0 and U0 in certified arithmetic.

    ``params`` may carry ``A``: overrides for A_0..A_l (None keeps the default
    max{e, H(u_i), exp(e|Log u_i|/D)}).
    """
    params = resolve_params(params)
    precision = int(precision or get_setting("PRECISION_BITS"))
    total = product_value(u_list, u, z)
    l = len(u_list)
    D = generated_degree(list(u_list) + [u])
    heights = [height(w, precision) for w in u_list]
    h_u = height(u, precision)
    embedded = [w.embeddings(precision)[embedding] for w in list(u_list) + [u]]

    with working_precision(precision + 16):
        e = +iv.e
        B, log_B = _size_condition(h_u, z, params)
        logs = [_principal_log(value) for value in embedded]
        z0 = _pi_multiple(total, logs, z, embedding, precision)
        log_sizes = [+iv.pi] + [_log_size(*pair) for pair in logs[:-1]]
        log_size_u = _log_size(*logs[-1])

        overrides = list(params.get("A") or [])
        overrides += [None] * (l + 1 - len(overrides))
        A = []
        for i in range(l + 1):
            h = iv.mpf(1) if i == 0 else heights[i - 1].value
            if overrides[i] is None:
                value = interval_max(interval_max(e, h), iv.exp(e * log_sizes[i] / D))
            else:
                value = _constant(overrides[i])
                if certainly_less(value, e) or certainly_less(value, h):
                    raise DegenerateInstance(
                        f"A_{i} must be at least e and at least H(u_{i})",
                        {"A": str(overrides[i]), "height": _fmt(h)},
                    )
            A.append(value)

        log_A = [iv.ln(a) for a in A]
        A_max = B
        for a in A:
            A_max = interval_max(A_max, a)
        exponents = [z0] + [int(v) for v in z]
        M = None
        for log_a, exponent in zip(log_A, exponents):
            term = 1 / log_a + abs(exponent) / log_B
            M = term if M is None else interval_max(M, term)
        log_D = iv.ln(iv.mpf(D))
        Z0 = interval_max(7 + 3 * iv.ln(iv.mpf(l + 2)), log_D)
        G0 = interval_max(interval_max(4 * (l + 2) * Z0, iv.ln(M)), log_D)
        log_product = log_B
        for log_a in log_A:
            log_product = log_product * log_a
        U0 = interval_max(
            D**2 * iv.ln(A_max), iv.mpf(D) ** (l + 4) * G0 * Z0 * log_product
        )

        auxiliary = log_size_u / log_B
        for log_size, log_a in zip(log_sizes, log_A):
            auxiliary = auxiliary + log_size / log_a
        auxiliary_holds = certainly_leq(auxiliary, (l + 2) * D / e)
        largeness = iv.exp(
            -_constant(params["c1"]) * iv.ln(_constant(params["c2"])) * iv.ln(_constant(params["c3"]))
        )
        largeness_holds = certainly_leq(largeness, iv.mpf(0.5))

    if not auxiliary_holds:
        logger.warning("Auxiliary constraint on the A_i not certified for z=%s", list(z))
    return WaldschmidtChain(
        D, A, B, A_max, M, Z0, G0, U0, z0, auxiliary_holds, largeness_holds, params
    )


@dataclass
class WaldschmidtBound:
    bound: "iv.mpf"
    proof_route: "iv.mpf"
    chain: WaldschmidtChain

    def to_json(self) -> Dict[str, Any]:
        return {
            "bound": _fmt(self.bound),
            "proof_route": _fmt(self.proof_route),
            "chain": self.chain.to_json(),
        }


def _closed_form(c1, log_B, size: int, c3) -> "iv.mpf":
    return iv.exp(-c1 * log_B * iv.ln(c3 * size / log_B))


def waldschmidt_bound(
    u_list: Sequence[NumberFieldElement],
    u: NumberFieldElement,
    z: Sequence[int],
    params: Optional[Dict[str, Any]] = None,
    precision: Optional[int] = None,
    embedding: int = 0,
) -> WaldschmidtBound:
    """exp(-c1 · log(c2 H(u)) · log(c3 ‖z‖∞ / log(c2 H(u)))) beside exp(-c·U0)."""
    if product_value(u_list, u, z) == u.field.one():
        raise DegenerateInstance(
            "degenerate instance: ∏ u_i^{z_i} · u = 1", {"z": list(z)}
        )
    chain = waldschmidt_chain(u_list, u, z, params, precision, embedding)
    params = chain.params
    size = max(abs(int(v)) for v in z)
    with working_precision(int(precision or get_setting("PRECISION_BITS")) + 16):
        log_B = iv.ln(interval_max(chain.B, +iv.e))
        bound = _closed_form(_constant(params["c1"]), log_B, size, _constant(params["c3"]))
        proof_route = iv.exp(-_constant(params["c"]) * chain.U0)
    return WaldschmidtBound(bound, proof_route, chain)


def empirical_gap(
    u_list: Sequence[NumberFieldElement],
    u: NumberFieldElement,
    z: Sequence[int],
    precision: Optional[int] = None,
    embedding: int = 0,
) -> "iv.mpf":
    """Certified |σ(∏ u_i^{z_i} · u) - 1| in the embedding ``embedding``."""
    difference = product_value(u_list, u, z) - 1
    if difference.is_zero:
        raise DegenerateInstance(
            "degenerate instance: ∏ u_i^{z_i} · u = 1", {"z": list(z)}
        )
    bits = int(precision or get_setting("PRECISION_BITS"))
    cap = get_setting("PRECISION_CAP_BITS")
    while bits <= cap:
        value = difference.embeddings(bits)[embedding]
        with working_precision(bits + 16):
            if value.excludes_zero():
                return value.modulus()
        logger.debug("Gap at z=%s not separated from 0 at %d bits; doubling", list(z), bits)
        bits *= 2
    raise PrecisionExhausted("Could not separate the gap from 0", {"z": list(z)})


@dataclass(frozen=True)
class GapInstance:
    u_list: Tuple[NumberFieldElement, ...]
    u: NumberFieldElement
    z: Tuple[int, ...]

    def to_json(self) -> Dict[str, Any]:
        return {
            "u_list": [w.to_json() for w in self.u_list],
            "u": self.u.to_json(),
            "z": list(self.z),
        }


def instance_grid(
    u_list: Sequence[NumberFieldElement], u_values: Sequence[NumberFieldElement], z_max: int
) -> List[GapInstance]:
    """Every (u, z) with u from ``u_values`` and z in [-z_max, z_max]^l, z != 0."""
    instances = []
    for u in u_values:
        for z in product(range(-z_max, z_max + 1), repeat=len(u_list)):
            if any(z):
                instances.append(GapInstance(tuple(u_list), u, tuple(z)))
    return instances


@dataclass
class Calibration:
    c1: "mp.mpf"
    bracket: Tuple["mp.mpf", "mp.mpf"]
    used: int
    excluded: List[Dict[str, Any]] = field(default_factory=list)
    # index into the used instances of the one that forces c1
    binding: Optional[int] = None

    def to_json(self) -> Dict[str, Any]:
        return {
            "c1": mp.nstr(self.c1, 15),
            "bracket": [mp.nstr(v, 15) for v in self.bracket],
            "used": self.used,
            "excluded": self.excluded,
            "binding": self.binding,
        }


def calibrate_c1(
    instances: Sequence[GapInstance],
    params: Optional[Dict[str, Any]] = None,
    precision: Optional[int] = None,
    embedding: int = 0,
) -> Calibration:
    """Smallest c1 (up to bisection width) with bound <= gap on every instance.

    Instances violating ‖z‖∞ >= log(c2 H(u)), or exactly degenerate, are
    excluded and reported. The returned c1 is the upper end of the final
    bracket, so the inequality is certified there.
    """
    params = resolve_params(params)
    precision = int(precision or get_setting("PRECISION_BITS"))
    excluded = []
    terms = []
    for instance in instances:
        try:
            gap = empirical_gap(instance.u_list, instance.u, instance.z, precision, embedding)
            with working_precision(precision + 16):
                _, log_B = _size_condition(height(instance.u, precision), instance.z, params)
                size = max(abs(v) for v in instance.z)
                rate = log_B * iv.ln(_constant(params["c3"]) * size / log_B)
        except DegenerateInstance as exc:
            excluded.append({"instance": instance.to_json(), "reason": exc.message})
            continue
        terms.append((rate, gap))
    if not terms:
        raise DegenerateInstance("No valid instance to calibrate on", {"excluded": len(excluded)})

    with working_precision(precision + 16):

        def holds(c1) -> bool:
            return all(
                certainly_leq(iv.exp(-iv.mpf(c1) * rate), gap) for rate, gap in terms
            )

        # per-instance closed-form requirement, used to bracket the search
        seeds = [
            max(mp.mpf(0), -mp.log(lower(gap)) / lower(rate)) if lower(rate) > 0 else mp.mpf(0)
            for rate, gap in terms
        ]
        binding = max(range(len(seeds)), key=seeds.__getitem__)
        lo = mp.mpf(0)
        if holds(lo):
            hi = lo
        else:
            hi = max(seeds, default=mp.mpf(1)) * (1 + mp.mpf(2) ** -20) + mp.mpf(2) ** -40
            for _ in range(64):
                if holds(hi):
                    break
                lo, hi = hi, 2 * hi
            else:
                raise CertificationUndecided("No c1 makes every bound certifiably smaller than its gap")
            for _ in range(CALIBRATION_STEPS):
                middle = (lo + hi) / 2
                if holds(middle):
                    hi = middle
                else:
                    lo = middle
    logger.info(
        "Calibrated c1 = %s on %d instances (%d excluded)", mp.nstr(hi, 10), len(terms), len(excluded)
    )
    return Calibration(hi, (lo, hi), len(terms), excluded, binding)


def calibration_refinement(
    u_list: Sequence[NumberFieldElement],
    u_values: Sequence[NumberFieldElement],
    z_max: int,
    params: Optional[Dict[str, Any]] = None,
    precision: Optional[int] = None,
    embedding: int = 0,
) -> Dict[str, Any]:
    """c1 on the grid up to ``z_max`` and on its refinement up to 2·z_max."""
    coarse = calibrate_c1(instance_grid(u_list, u_values, z_max), params, precision, embedding)
    fine = calibrate_c1(instance_grid(u_list, u_values, 2 * z_max), params, precision, embedding)
    change = (
        abs(fine.c1 - coarse.c1) / fine.c1 if fine.c1 else mp.mpf(0)
    )
    return {
        "grid": coarse.to_json(),
        "refined": fine.to_json(),
        "relative_change": mp.nstr(change, 6),
    }
