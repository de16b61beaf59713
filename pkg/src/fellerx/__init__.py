"""Feller boundary conditions for one-dimensional diffusions: scale and speed,
eigenfunctions, minimal and extended resolvents, a finite-difference oracle
and an excursion-based Monte Carlo simulator."""

from .boundary import (
    FellerBoundaryData,
    JumpMeasure,
    extended_resolvent,
    generator_domain_check,
    matrix_A,
    psi_ab,
    validate,
)
from .diffusion import (
    Compactifier,
    DiffusionSpec,
    classify_boundary,
    feller_integrals,
    from_sde,
    make_grid,
    spec_from_densities,
    spec_from_functions,
)
from .eigen import EigenSolution, solve_eigen
from .errors import FellerError
from .excursion import (
    assemble_path,
    mc_psi,
    mc_resolvent,
    mc_boundary_identity,
    sample_excursion,
    sample_minimal_path,
)
from .grid_oracle import discretize, solve_resolvent
from .minimal import apply_minimal, kernel_at, make_kernel

__version__ = "0.1.0"
