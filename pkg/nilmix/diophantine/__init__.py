from .heights import HeightValue, height, vector_height
from .sunits import SUnitInstance, SUnitResult, sunit_solutions
from .waldschmidt import (
    GapInstance,
    WaldschmidtChain,
    calibrate_c1,
    calibration_refinement,
    empirical_gap,
    instance_grid,
    waldschmidt_bound,
    waldschmidt_chain,
)

__all__ = [
    "GapInstance",
    "HeightValue",
    "SUnitInstance",
    "SUnitResult",
    "WaldschmidtChain",
    "calibrate_c1",
    "calibration_refinement",
    "empirical_gap",
    "height",
    "instance_grid",
    "sunit_solutions",
    "vector_height",
    "waldschmidt_bound",
    "waldschmidt_chain",
]
