"""Optimal structured feedback for homogeneous multi-agent linear systems.

Diffusive synchronizing gains and broadcast centroid gains are obtained by
solving a linear quadratic regulator on a reduced output system and lifting
the resulting static output feedback back to the full state.
"""

from .errors import StructFBError
from .multiagent import (
    FullWeights,
    HomogeneousWeights,
    LinearSystem,
    MultiAgentProblem,
    build_centroid_problem,
    build_sync_problem,
    gamma_basis,
    solve_centroid,
    solve_sync,
    solve_sync_homogeneous,
)
from .reduction import GainResult, OutputMap, ReducedProblem, induced_output_map, solve_output_lqr
from .riccati import (
    CareProblem,
    GapReport,
    RiccatiSolution,
    compare_solutions,
    gap_analysis,
    newton_kleinman_refine,
    solve_care_stabilizing,
)

__version__ = "0.1.0"
