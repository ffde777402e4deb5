"""Random walks with a membrane and their skew Brownian motion limit."""

__version__ = "0.1.0"

from .membrane import (
    ConnectednessError,
    JumpPmf,
    MembraneSpec,
    SpecError,
    exit_law,
    exit_laws,
    parse_spec,
    simulate_walk,
    simulate_walks,
    sojourn_law,
    validate,
)
from .pathops import DeletionSchedule, Path, delete_time, detect_schedule
from .skewbm import SkewBmParams, sample_skew_path, skew_cdf, skew_density
from .skewness import (
    DegenerateModelError,
    boundary_level,
    gamma_exact,
    rho_closed_form,
    rho_direct_solve,
    rho_limit,
)
from .stats import (
    half_normal_cdf,
    ks_distance,
    marginal_experiment,
    occupation_experiment,
    zero_visit_experiment,
)

__all__ = [
    "ConnectednessError", "JumpPmf", "MembraneSpec", "SpecError", "exit_law", "exit_laws",
    "parse_spec", "simulate_walk", "simulate_walks", "sojourn_law", "validate",
    "DeletionSchedule", "Path", "delete_time", "detect_schedule",
    "SkewBmParams", "sample_skew_path", "skew_cdf", "skew_density",
    "DegenerateModelError", "boundary_level", "gamma_exact", "rho_closed_form",
    "rho_direct_solve", "rho_limit",
    "half_normal_cdf", "ks_distance", "marginal_experiment", "occupation_experiment",
    "zero_visit_experiment",
]
