"""
specfun/__init__.py

Special-function kernel shared by the theta and Schwarz-Christoffel solvers.
"""

from .elliptic import agm, agm_extended, complementary, ellipk, hyp_half, modulus_ratio
from .quadrature import (
    gauss_jacobi,
    gauss_legendre,
    lauricella_fd,
    log_side_integral,
    sc_side_integral,
    side_phase,
)
from .theta import theta1, theta1_logderiv

__all__ = [
    "agm",
    "agm_extended",
    "complementary",
    "ellipk",
    "gauss_jacobi",
    "gauss_legendre",
    "hyp_half",
    "lauricella_fd",
    "log_side_integral",
    "modulus_ratio",
    "sc_side_integral",
    "side_phase",
    "theta1",
    "theta1_logderiv",
]
