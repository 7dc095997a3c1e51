from .cocycles import (
    CocycleCertificate,
    CocycleValidator,
    TorusCocycle,
    coboundary,
    cocycle_validate,
    subtract_average,
)
from .orbits import DualOrbit, DualOrbitDecomposition, dual_orbits
from .rigidity import (
    CoboundarySolution,
    RigidityReport,
    SigmaSquared,
    SolutionSpace,
    coboundary_solve,
    higher_rank_sum,
    rigidity_pipeline,
    sample_compatible,
    sigma_squared,
    solution_space_check,
    telescoping_check,
)

__all__ = [
    "CoboundarySolution",
    "CocycleCertificate",
    "CocycleValidator",
    "DualOrbit",
    "DualOrbitDecomposition",
    "RigidityReport",
    "SigmaSquared",
    "SolutionSpace",
    "TorusCocycle",
    "coboundary",
    "coboundary_solve",
    "cocycle_validate",
    "dual_orbits",
    "higher_rank_sum",
    "rigidity_pipeline",
    "sample_compatible",
    "sigma_squared",
    "solution_space_check",
    "subtract_average",
    "telescoping_check",
]
