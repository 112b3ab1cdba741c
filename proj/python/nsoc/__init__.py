"""Python bindings for the nsoc solver library."""

from ._nsoc import (
    ConfigError,
    ConvergenceError,
    Discretization,
    GridMismatch,
    IoError,
    admissible_adjoint_exponents,
    apply_S_prime,
    embedding_exponents,
    expansion_residuals,
    frechet_remainder_study,
    manufactured_instance,
    optimize,
    pde_residual,
    phi,
    potential,
    prox_potential,
    reduced_gradient,
    run_experiment,
    run_property_suite,
    solve_state,
)

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "Discretization",
    "GridMismatch",
    "IoError",
    "admissible_adjoint_exponents",
    "apply_S_prime",
    "embedding_exponents",
    "expansion_residuals",
    "frechet_remainder_study",
    "manufactured_instance",
    "optimize",
    "pde_residual",
    "phi",
    "potential",
    "prox_potential",
    "reduced_gradient",
    "run_experiment",
    "run_property_suite",
    "solve_state",
]
