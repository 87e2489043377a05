"""Numerical laboratory for repulsive two-species lattice random walks,
the semi-discrete SKT cross-diffusion system, and discrete duality estimates."""

__version__ = "0.1.0"

from .duality import (
    DualityReport,
    EnvCoefficient,
    JumpPath,
    StabilityReport,
    solve_kolmogorov,
    solve_kolmogorov_singular,
    stability_gap,
    verify_combined,
    verify_duality,
    verify_singular,
)
from .grid import PeriodicLaplacian, apply_mass_matrix, inner, lp_norm, mean_of, tilde
from .kernel import BACKEND
from .params import ModelParams
from .reconstruct import (
    FineGridFunction,
    PiecewiseLinear,
    StepFunction,
    fourier_sobolev_norm,
    interpolate_nodal,
    resample,
    trip_norm_continuous,
    trip_norm_discrete,
)
from .semidiscrete import IntegratorConfig, exact_decoupled_mode, integrate, rhs
from .walkers import (
    CountsState,
    PathRecord,
    RateTree,
    extract_martingale,
    init_from_density,
    predicted_qv,
    simulate_path,
    step,
)

__all__ = [
    "BACKEND",
    "CountsState",
    "DualityReport",
    "EnvCoefficient",
    "FineGridFunction",
    "IntegratorConfig",
    "JumpPath",
    "ModelParams",
    "PathRecord",
    "PeriodicLaplacian",
    "PiecewiseLinear",
    "RateTree",
    "StabilityReport",
    "StepFunction",
    "apply_mass_matrix",
    "exact_decoupled_mode",
    "extract_martingale",
    "fourier_sobolev_norm",
    "init_from_density",
    "inner",
    "integrate",
    "interpolate_nodal",
    "lp_norm",
    "mean_of",
    "predicted_qv",
    "resample",
    "rhs",
    "simulate_path",
    "solve_kolmogorov",
    "solve_kolmogorov_singular",
    "stability_gap",
    "step",
    "tilde",
    "trip_norm_continuous",
    "trip_norm_discrete",
    "verify_combined",
    "verify_duality",
    "verify_singular",
]
