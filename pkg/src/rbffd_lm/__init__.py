"""Meshfree RBF-FD Poisson solver with Lagrange multiplier boundary conditions."""
from __future__ import annotations

from .assembly import CollocationMode, assemble_dirichlet, assemble_laplacian, assemble_neumann
from .exceptions import (
    BoundaryPointError,
    ConfigError,
    DegenerateNorm,
    MissingNormal,
    NodeGenerationError,
    RBFFDError,
    SingularGlobalSystem,
    SingularStencil,
)
from .geometry import (
    BUTTERFLY,
    UNIT_BALL,
    UNIT_DISK,
    Domain,
    NodeSet,
    fitted_node_set,
    unfitted_node_set,
)
from .harness import RunConfig, run_convergence, run_heatmap, run_single, run_timing
from .problems import get_problem, relative_l2_error
from .rbf_core import Evaluation, Laplacian, NormalDerivative, StencilConfig, stencil_weights
from .solvers import solve_collocation, solve_kkt_normal, solve_kkt_saddle, solve_lm1, solve_lm2

__version__ = "0.1.0"
