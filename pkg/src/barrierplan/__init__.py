"""Collision-free pose and trajectory optimization over convex hulls.

Candidate poses or trajectories are optimized subject to pairwise
non-penetration, enforced through inverse-barrier penalties on the
margins of separating planes.  Three solvers share the same problem
definition: a joint Newton method over configuration and planes
(``ecb_solve``), a Newton method over configuration alone with planes
as implicit functions (``icb_solve``), and a first-order alternating
baseline (``ao_solve``).
"""

from .ao import ao_solve
from .barrier import (
    InverseBarrier,
    make_barrier,
    pair_penalty_blocks,
    pair_penalty_value,
    plane_energy,
)
from .common import (
    CONVERGED,
    MAX_ITERS,
    STALLED,
    IterationRecord,
    SolveResult,
    SolverSettings,
    SolveTrace,
)
from .ecb import ecb_solve
from .errors import (
    BarrierPlanError,
    BoundaryViolationError,
    DegeneratePairError,
    InfeasibleStartError,
    InnerSolveError,
    LineSearchError,
    NoSeparatingPlaneError,
    ScenarioError,
)
from .geometry import (
    CollisionPairSet,
    ConvexBody,
    SeparatingPlane,
    broadphase_pairs,
    closest_points,
    make_pair_key,
    midplane_from_closest,
)
from .icb import icb_solve, implicit_derivatives, implicit_objective, inner_solve
from .kinematics import (
    FreeBodyFrame,
    RevoluteChain,
    SceneModel,
    SplineTrajectoryModel,
    StaticFrame,
)
from .objectives import (
    ConfigRegularizer,
    GravityPotential,
    Objective,
    TargetPoint,
    TrajectorySmoothness,
)
from .problem import Problem
from .scenarios import Scenario, bundled_scenarios, load_scenario

__version__ = "0.1.0"

__all__ = [
    "BarrierPlanError",
    "BoundaryViolationError",
    "CONVERGED",
    "CollisionPairSet",
    "ConfigRegularizer",
    "ConvexBody",
    "DegeneratePairError",
    "FreeBodyFrame",
    "GravityPotential",
    "InfeasibleStartError",
    "InnerSolveError",
    "InverseBarrier",
    "IterationRecord",
    "LineSearchError",
    "MAX_ITERS",
    "NoSeparatingPlaneError",
    "Objective",
    "Problem",
    "RevoluteChain",
    "STALLED",
    "Scenario",
    "ScenarioError",
    "SceneModel",
    "SeparatingPlane",
    "SolveResult",
    "SolveTrace",
    "SolverSettings",
    "SplineTrajectoryModel",
    "StaticFrame",
    "TargetPoint",
    "TrajectorySmoothness",
    "ao_solve",
    "broadphase_pairs",
    "bundled_scenarios",
    "closest_points",
    "ecb_solve",
    "icb_solve",
    "implicit_derivatives",
    "implicit_objective",
    "inner_solve",
    "load_scenario",
    "make_barrier",
    "make_pair_key",
    "midplane_from_closest",
    "pair_penalty_blocks",
    "pair_penalty_value",
    "plane_energy",
]
