"""Geometry, concentration and MCMC diagnostics for the Bayesian LASSO posterior."""
from .concentration import (
    TailBoundReport,
    concentration_radius,
    general_radius,
    tail_bound,
)
from .errors import (
    BayesLassoError,
    DimensionError,
    DomainError,
    NumericalError,
    SingularDirectionError,
)
from .geometry import (
    Direction,
    GeometryContext,
    ball_volume_p2,
    omega_lasso,
    partition_closed,
    partition_radial,
    partition_total,
    quasi_norm,
    r_max,
)
from .lasso import LassoResult, SolverConfig, is_zero_lasso, solve
from .sampler import (
    ChainResult,
    DiagnosticSeries,
    diagnose,
    ergodicity_rate,
    run_independent_sampler,
    run_random_walk,
)

__version__ = "0.1.0"
