"""Pseudo-spectral tools for the 2D Boussinesq system with fractional dissipation.

Submodules:

``spectral``          grids, spectral fields, Fourier multipliers
``littlewood_paley``  dyadic blocks, Besov and Chemin-Lerner norms
``initial_data``      band-limited presets and random ensembles
``sources``           buoyancy source functions F(theta)
``solvers``           IFRK4 transport-diffusion and Boussinesq solvers
``records``           binary trajectories and CSV summaries
``harness``           measured constants for the analytic estimates
``cli``               command-line front end
"""
from .littlewood_paley import (
    DEFAULT_PARTITION,
    BesovIndex,
    DyadicPartition,
    besov_norm,
    block_norms,
    chemin_lerner_norm,
    decompose,
    dyadic_block,
    low_pass,
)
from .solvers import (
    IntegratorConfig,
    SolverAbort,
    SolverState,
    Trajectory,
    evaluate_source,
    solve_boussinesq,
    solve_transport_diffusion,
    twin_run_stability,
)
from .sources import SourceFunction
from .spectral import (
    FractionalOrder,
    Grid,
    SpectralField,
    VectorField,
    biot_savart,
    fractional_laplacian,
    lp_norm,
    semigroup_apply,
)

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "SpectralField",
    "VectorField",
    "FractionalOrder",
    "fractional_laplacian",
    "semigroup_apply",
    "biot_savart",
    "lp_norm",
    "DyadicPartition",
    "DEFAULT_PARTITION",
    "BesovIndex",
    "dyadic_block",
    "low_pass",
    "decompose",
    "block_norms",
    "besov_norm",
    "chemin_lerner_norm",
    "SourceFunction",
    "IntegratorConfig",
    "SolverState",
    "SolverAbort",
    "Trajectory",
    "solve_transport_diffusion",
    "solve_boussinesq",
    "evaluate_source",
    "twin_run_stability",
]
