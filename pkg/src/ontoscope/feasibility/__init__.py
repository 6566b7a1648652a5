from .coloring import ColoringResult, RaySet, count_assignments, ks_colorable, load_fixture, rays_from_contexts
from .lp import (
    BilinearProblemError,
    FeasibilityProblem,
    InconsistentTargetsError,
    LpResult,
    lp_feasible,
)
