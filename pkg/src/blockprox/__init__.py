"""Stochastic mirror-prox solvers for Cartesian variational inequalities.

Randomized-block and full-block mirror-prox with weighted iterate averaging,
synthetic problem generators with known solutions, and a benchmark harness
that checks the convergence-rate guarantees at desk scale.
"""

from .backends import HAVE_COMPILED
from .geometry import (
    BlockGeometry,
    BlockStructure,
    BlockVector,
    ComponentSet,
    GeometryError,
    bregman_distance,
    composite_norm_sq,
    dual_norm,
    project,
    prox_map,
)
from .metrics import (
    RateConstants,
    fit_rate,
    gap_function,
    lyapunov,
    mse,
    rate_constants,
    verify_recursion_lemma,
    verify_stepsize_sums,
)
from .problems import (
    ProblemConstants,
    ProblemError,
    ScviProblem,
    certify_constants,
    certify_monotonicity,
    make_monotone_affine,
    make_nash_quadratic,
    make_scop_quadratic,
    make_strictly_pseudo_monotone,
    make_strongly_monotone_affine,
    sample_map,
    solve_deterministic,
)
from .solvers import (
    BsmpConfig,
    RunTrace,
    SmpConfig,
    StepsizeSchedule,
    auto_gamma0,
    bsmp_step,
    run_bsmp,
    run_smp,
    weighted_average_update,
)

__version__ = "0.1.0"

__all__ = [
    "HAVE_COMPILED",
    "BlockGeometry",
    "BlockStructure",
    "BlockVector",
    "ComponentSet",
    "GeometryError",
    "bregman_distance",
    "composite_norm_sq",
    "dual_norm",
    "project",
    "prox_map",
    "RateConstants",
    "fit_rate",
    "gap_function",
    "lyapunov",
    "mse",
    "rate_constants",
    "verify_recursion_lemma",
    "verify_stepsize_sums",
    "ProblemConstants",
    "ProblemError",
    "ScviProblem",
    "certify_constants",
    "certify_monotonicity",
    "make_monotone_affine",
    "make_nash_quadratic",
    "make_scop_quadratic",
    "make_strictly_pseudo_monotone",
    "make_strongly_monotone_affine",
    "sample_map",
    "solve_deterministic",
    "BsmpConfig",
    "RunTrace",
    "SmpConfig",
    "StepsizeSchedule",
    "auto_gamma0",
    "bsmp_step",
    "run_bsmp",
    "run_smp",
    "weighted_average_update",
    "__version__",
]
