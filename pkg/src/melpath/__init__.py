"""Memory Euler-Lagrange path planning."""
from .exceptions import (
    BracketError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    InputError,
    MelpathError,
    OptimizationError,
    ShootingError,
    StallError,
)
from .estimator import DiscretePathPlanner, MemoryPathPlanner
from .functional import (
    AccumulationProfile,
    Trajectory,
    accumulation_profile,
    evaluate_objective,
    modified_energy,
)
from .model import (
    InfoModel,
    KernelKind,
    KParameter,
    MemoryProblem,
    PointOfInterest,
    RiskModel,
    TransformKind,
    line_problem,
    plane_problem,
)
from .oracle import DiscretePath, optimize_discrete
from .solver import (
    ShootingResult,
    SweepRecord,
    fixed_point_K,
    objective_of_K,
    optimize_K,
    shoot,
    sweep_K,
    tail_K,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
