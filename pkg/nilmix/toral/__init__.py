from .correlation import (
    CorrelationResult,
    SeparationStats,
    ShapePowerLaw,
    brute_force_correlation,
    multi_correlation,
    separation_stats,
    shape_power_law,
)
from .fitting import DecayFit, decay_fit, scaled_shapes
from .trig import TrigPolynomial, gaussian, merge

__all__ = [
    "CorrelationResult",
    "DecayFit",
    "SeparationStats",
    "ShapePowerLaw",
    "TrigPolynomial",
    "brute_force_correlation",
    "decay_fit",
    "gaussian",
    "merge",
    "multi_correlation",
    "scaled_shapes",
    "separation_stats",
    "shape_power_law",
]
