"""Proximal point method for nonsmooth, nonconvex multiobjective problems.

Structured objectives (smooth atoms combined by max, min and exp) come with
exact limiting and Clarke subdifferentials, so Pareto criticality and
Fritz-John conditions can be certified rather than estimated.
"""

__version__ = "0.1.0"

from .convexset import Ball, Box, InfeasiblePointError, Polyhedron, WholeSpace  # noqa: E402
from .criticality import (  # noqa: E402
    fritz_john_residual, hull_stationarity, is_pareto_critical, positivity_check,
    positivity_margin, proximal_step_certificate,
)
from .estimator import ProximalPointMOO  # noqa: E402
from .funcspace import (  # noqa: E402
    Affine, ExpOf, MaxOf, MinOf, NormSqShift, Polynomial, Quadratic, Smooth, VectorFunction,
    clarke_subdiff, exp_transform, frechet_subdiff, limiting_subdiff,
)
from .oracle import GridSpec, frechet_limit_subdiff_1d, grid_weak_pareto, sampled_criticality  # noqa: E402
from .ppa import PpaConfig, Trajectory, fejer_diagnostics, run, step_norm_identity_check  # noqa: E402
from .problems import Problem, load_problem  # noqa: E402
from .subsolver import SubproblemSpec, solve  # noqa: E402
