from .boxmaps import (
    BoxMap,
    DichotomyResult,
    EquidistributionResult,
    ObstructionResult,
    Projection,
    SuiteInstance,
    box_average,
    boxmap_equidistribution_test,
    boxmap_obstruction_search,
    character_equidistribution_test,
    dichotomy_check,
    dichotomy_suite,
)
from .bumps import BaseCharacter, Bump, Constant, HolderFunction, function_from_json, product_integral
from .heisenberg import (
    HeisAction,
    HeisAuto,
    HeisPoint,
    heis_auto_apply,
    heis_exp,
    heis_inverse,
    heis_mul,
    heis_reduce,
)
from .montecarlo import MonteCarloEstimate, mc_correlation, run_chunks

__all__ = [
    "BaseCharacter",
    "BoxMap",
    "Bump",
    "Constant",
    "DichotomyResult",
    "EquidistributionResult",
    "HeisAction",
    "HeisAuto",
    "HeisPoint",
    "HolderFunction",
    "MonteCarloEstimate",
    "ObstructionResult",
    "Projection",
    "SuiteInstance",
    "box_average",
    "boxmap_equidistribution_test",
    "boxmap_obstruction_search",
    "character_equidistribution_test",
    "dichotomy_check",
    "dichotomy_suite",
    "function_from_json",
    "heis_auto_apply",
    "heis_exp",
    "heis_inverse",
    "heis_mul",
    "heis_reduce",
    "mc_correlation",
    "product_integral",
    "run_chunks",
]
