"""Third-order implicit finite-volume schemes for 1D stiff hyperbolic systems.

The package integrates conservation laws with a diagonally implicit
Runge-Kutta method whose nonlinear reconstruction weights are frozen on a
first-order implicit predictor, and guards large time-steps with a
conservative flux-centered a-posteriori limiter driven by numerical entropy
production. `quinpi.driver` exposes the benchmark catalog and convergence
harness; the `quinpi` console script wraps it.
"""

from .driver import Scheme, available_problems, make_problem, run_problem
from .grid import BoundaryCondition, Grid1D
from .limiter import LimiterConfig, MarkingStrategy
from .timeint import NewtonConfig

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition",
    "Grid1D",
    "LimiterConfig",
    "MarkingStrategy",
    "NewtonConfig",
    "Scheme",
    "available_problems",
    "make_problem",
    "run_problem",
    "__version__",
]
