"""Model averaging over nested least-squares candidates."""
from .dgp import ScenarioSpec, generate, make_scenario
from .errors import (
    CapacityError,
    DegenerateTruthError,
    RankDeficiencyError,
    RepFailure,
    SolverError,
)
from .objectives import (
    Discrete,
    Simplex,
    SeparableSimplexObjective,
    build_criterion,
    build_loss,
    build_risk,
)
from .projection import NestedDesign, coords, factorize, sigma_hat
from .solver import solve_discrete, solve_generic_qp, solve_restricted, solve_simplex

__version__ = "0.1.0"
