"""
common/errors.py

Exception hierarchy. Every failure carries an ErrorCode so callers and the CLI can
match on the code rather than on message text.
"""

from enum import Enum
from typing import Any, Dict, Optional


class ErrorCode(Enum):
    # geometry
    INVALID_DOCUMENT = "INVALID_DOCUMENT"
    NON_MONOTONE_X = "NON_MONOTONE_X"
    BAD_ARITY = "BAD_ARITY"
    NONPOSITIVE_LENGTH = "NONPOSITIVE_LENGTH"
    DECODE_AMBIGUOUS = "DECODE_AMBIGUOUS"
    SELF_INTERSECTION = "SELF_INTERSECTION"
    NOT_SIMPLY_CONNECTED = "NOT_SIMPLY_CONNECTED"
    NOT_SYMMETRIC = "NOT_SYMMETRIC"
    # special functions
    NONCONVERGENT = "NONCONVERGENT"
    POLE_AT_LATTICE_POINT = "POLE_AT_LATTICE_POINT"
    DOMAIN = "DOMAIN"
    PARAM_DOMAIN = "PARAM_DOMAIN"
    QUADRATURE_STALL = "QUADRATURE_STALL"
    NONINTEGRABLE_ENDPOINT = "NONINTEGRABLE_ENDPOINT"
    NODE_INSIDE_INTERVAL = "NODE_INSIDE_INTERVAL"
    # solvers
    POLE_AT_P = "POLE_AT_P"
    NO_CONVERGENCE = "NO_CONVERGENCE"
    LEFT_DOMAIN = "LEFT_DOMAIN"
    CROWDING = "CROWDING"
    WRONG_ARC_COUNT = "WRONG_ARC_COUNT"
    DEGENERATE = "DEGENERATE"
    ORIENTATION_FLIP = "ORIENTATION_FLIP"
    SINGULAR_OVERLAP = "SINGULAR_OVERLAP"
    ITERATION_LIMIT = "ITERATION_LIMIT"
    CHECK_FAIL = "CHECK_FAIL"
    NOT_CONVERGED = "NOT_CONVERGED"
    OOM_GUARD = "OOM_GUARD"
    # harness
    METHOD_SCOPE = "METHOD_SCOPE"


class CondcapError(Exception):
    """Base error; ``code`` identifies the failure, ``context`` carries extra data."""

    def __init__(self, code: ErrorCode, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(f"{code.value}: {message}")
        self.code = code
        self.message = message
        self.context = dict(context or {})


class GeometryError(CondcapError):
    pass


class SpecfunError(CondcapError):
    pass


class SolverError(CondcapError):
    pass


class HarnessError(CondcapError):
    pass
