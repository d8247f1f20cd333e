"""
condcap

Capacities of mirror-symmetric planar condensers with polygonal plates, by
genus-one theta functions, Schwarz-Christoffel maps, boundary integral equations
and a finite-difference oracle.
"""

from .common.errors import CondcapError, ErrorCode
from .common.types import CapacityResult, Family, Method
from .geometry import CondenserSpec, build_contours, half_domain, parse_spec
from .harness import compute, cross_validate, run_table
from .solvers import capacity_E, capacity_bie, capacity_fd, capacity_matrix, capacity_sc

__all__ = [
    "CapacityResult",
    "CondcapError",
    "CondenserSpec",
    "ErrorCode",
    "Family",
    "Method",
    "build_contours",
    "capacity_E",
    "capacity_bie",
    "capacity_fd",
    "capacity_matrix",
    "capacity_sc",
    "compute",
    "cross_validate",
    "half_domain",
    "parse_spec",
    "run_table",
]
