"""Decay-rate fits over separation sweeps of exact correlations."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from mpmath import iv, mp
from scipy import stats
from sympy.polys.domains import QQ_I

from nilmix.algebra.intervals import midpoint, working_precision
from nilmix.exceptions import DegenerateInstance
from nilmix.spectrum.action import ZlAction
from nilmix.toral.correlation import multi_correlation, separation_stats
from nilmix.toral.trig import TrigPolynomial, modulus

logger = logging.getLogger(__name__)

N_POWER = "N_power"
RHO_POWER = "rho_power"
MODELS = (N_POWER, RHO_POWER)

SWEEP_COLUMNS = ("separation", "N", "N_star", "corr_re", "corr_im", "radius")


def scaled_shapes(shape: Sequence[Sequence[int]], n_max: int) -> List[List[List[int]]]:
    """The sweep n·shape for n = 1..n_max."""
    return [[[n * v for v in z] for z in shape] for n in range(1, n_max + 1)]


@dataclass
class DecayFit:
    model: str
    samples: List[Dict[str, Any]]
    zero_onset: Optional[int] = None
    estimate: Optional[float] = None
    intercept: Optional[float] = None
    residuals: List[float] = field(default_factory=list)
    stderr: Optional[float] = None
    note: str = ""

    @property
    def parameter(self) -> str:
        return "eta_hat" if self.model == N_POWER else "rho_hat"

    def rows(self) -> List[Dict[str, Any]]:
        return [{column: sample[column] for column in SWEEP_COLUMNS} for sample in self.samples]

    def to_json(self) -> Dict[str, Any]:
        return {
            "model": self.model,
            self.parameter: self.estimate,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "residuals": self.residuals,
            "zero_onset": self.zero_onset,
            "note": self.note,
            "samples": self.samples,
        }


def _zero_onset(xs: Sequence[int], zero: Sequence[bool]) -> Optional[int]:
    """Smallest x from which every later sample is exactly zero."""
    onset = None
    for x, is_zero in sorted(zip(xs, zero), reverse=True):
        if not is_zero:
            break
        onset = x
    return onset


def decay_fit(
    action: ZlAction,
    f_list: Sequence[TrigPolynomial],
    sweep: Sequence[Sequence[Sequence[int]]],
    model: str = N_POWER,
    steps: Optional[Sequence[int]] = None,
    precision: Optional[int] = None,
    budget: Optional[int] = None,
    jobs: Optional[int] = None,
) -> DecayFit:
    """Least-squares fit of log|corr - ∏∫f_i| against log N (or against n for shapes).

    Exactly vanishing deviations do not enter the regression; they define
    ``zero_onset``. For ``rho_power`` the abscissa is ``steps`` (default 1, 2, ...).
    """
    if model not in MODELS:
        raise ValueError(f"Unknown decay model {model!r}; expected one of {MODELS}")
    if not sweep:
        raise ValueError("The sweep is empty")
    if all(set(f.support) <= {(0,) * f.dim} and f.is_exact for f in f_list):
        raise DegenerateInstance(
            "Constant test functions: every correlation equals the product of integrals"
        )
    steps = list(steps) if steps is not None else list(range(1, len(sweep) + 1))
    if len(steps) != len(sweep):
        raise ValueError("steps and sweep differ in length")

    product_of_means = QQ_I.one
    for f in f_list:
        product_of_means = product_of_means * f.mean()

    samples, xs, ys, zero = [], [], [], []
    for step, z_list in zip(steps, sweep):
        corr = multi_correlation(f_list, z_list, action, budget=budget, jobs=jobs)
        separation = separation_stats(action, z_list, precision)
        deviation = corr.value - product_of_means
        with working_precision(64):
            n_star = float(midpoint(iv.exp(separation.log_n_star)))
            size = modulus(deviation)
        x = separation.log_n if model == N_POWER else int(step)
        samples.append(
            {
                "separation": separation.log_n,
                "n": int(step),
                "N": float(mp.e**separation.log_n),
                "N_star": n_star,
                "corr_re": str(corr.re),
                "corr_im": str(corr.im),
                "radius": mp.nstr(corr.radius, 20) if corr.radius else "0",
                "exact_zero": not deviation,
            }
        )
        zero.append(not deviation)
        xs.append(x)
        if deviation:
            ys.append(math.log(float(midpoint(size))))
        else:
            ys.append(None)

    result = DecayFit(model, samples, _zero_onset(xs, zero))
    points = [(x, y) for x, y in zip(xs, ys) if y is not None]
    if not points:
        result.note = "every sample is exactly zero"
        logger.info("All %d correlations vanish exactly from %s", len(samples), result.zero_onset)
        return result
    if len({x for x, _ in points}) < 2:
        result.note = "fewer than two distinct abscissae with a nonzero deviation"
        logger.warning("Decay fit skipped: %s", result.note)
        return result

    fit = stats.linregress([float(x) for x, _ in points], [y for _, y in points])
    result.intercept = float(fit.intercept)
    result.stderr = float(fit.stderr)
    result.residuals = [float(y - (fit.intercept + fit.slope * x)) for x, y in points]
    result.estimate = -float(fit.slope) if model == N_POWER else math.exp(fit.slope)
    logger.info("Decay fit %s: %s = %.6g", model, result.parameter, result.estimate)
    return result
