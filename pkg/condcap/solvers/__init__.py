"""
solvers/__init__.py

Capacity solvers: theta functions (family E), Schwarz-Christoffel (doubly connected
half-domains), boundary integrals (any condenser) and the finite-difference oracle.
"""

from .bie_solver import (
    assemble,
    block_preconditioner,
    capacity_bie,
    capacity_matrix,
    density_dump,
    discretize,
    normal_condition,
    solve_density,
)
from .fd_oracle import GridProblem, capacity_fd, fd_levels
from .newton import continuation, damped_newton
from .sc_solver import capacity_sc, moebius_modulus, n_endpoint_preimages, solve_parameter_problem
from .theta_solver import SlotPairGeometry, TorusParams, capacity_E, residual_E, sc_map_w, solve_E

__all__ = [
    "GridProblem",
    "SlotPairGeometry",
    "TorusParams",
    "assemble",
    "block_preconditioner",
    "capacity_E",
    "capacity_bie",
    "capacity_fd",
    "capacity_matrix",
    "capacity_sc",
    "continuation",
    "damped_newton",
    "density_dump",
    "discretize",
    "fd_levels",
    "moebius_modulus",
    "n_endpoint_preimages",
    "normal_condition",
    "residual_E",
    "sc_map_w",
    "solve_E",
    "solve_density",
    "solve_parameter_problem",
]
