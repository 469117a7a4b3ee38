"""Auxiliary space multigrid preconditioning for mixed Darcy flow.

Lowest-order Raviart-Thomas / piecewise-constant discretizations on
uniform square grids, an additive Schur complement approximation of the
weighted velocity form, nonlinear AMLI cycles built on it, and a block
preconditioned minimum residual solver for the saddle-point system.
"""

from .asca import Hierarchy, HierarchyConfig, build_hierarchy
from .coeff import (
    CoefficientField,
    gen_binary_islands,
    gen_random_field,
    load_raster,
    resample,
    rescale,
    write_raster,
)
from .covering import Covering, build_covering
from .diag import (
    ExperimentConfig,
    Report,
    estimate_c_pi,
    estimate_rho_e,
    operator_complexity,
    rho_r,
    run_experiment,
)
from .errors import (
    AsmgError,
    BreakdownError,
    CoefficientError,
    ConfigurationError,
    DimensionError,
    FactorizationError,
    InternalError,
    RasterError,
    SolverStallError,
)
from .fem import SaddleSystem, assemble_rhs, assemble_saddle
from .grid import Grid, build_grid
from .precond import AmliConfig, AsmgPreconditioner, gcg
from .solvers import BlockPreconditioner, SolveReport, minres, pcg
from .transform import TwoLevelTransform, build_transform

__version__ = "0.1.0"

__all__ = [
    "AmliConfig",
    "AsmgError",
    "AsmgPreconditioner",
    "BlockPreconditioner",
    "BreakdownError",
    "CoefficientError",
    "CoefficientField",
    "ConfigurationError",
    "Covering",
    "DimensionError",
    "ExperimentConfig",
    "FactorizationError",
    "Grid",
    "Hierarchy",
    "HierarchyConfig",
    "InternalError",
    "RasterError",
    "Report",
    "SaddleSystem",
    "SolveReport",
    "SolverStallError",
    "TwoLevelTransform",
    "assemble_rhs",
    "assemble_saddle",
    "build_covering",
    "build_grid",
    "build_hierarchy",
    "build_transform",
    "estimate_c_pi",
    "estimate_rho_e",
    "gcg",
    "gen_binary_islands",
    "gen_random_field",
    "load_raster",
    "minres",
    "operator_complexity",
    "pcg",
    "rescale",
    "resample",
    "rho_r",
    "run_experiment",
    "write_raster",
    "__version__",
]
