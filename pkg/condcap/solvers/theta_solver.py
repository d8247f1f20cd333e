"""
solvers/theta_solver.py

Capacity of two parallel slots (family E) through the genus-one conformal map

    w(u) = -(l / 2 pi i) [g(u - p) + g(u + p)],    g = theta_1' / theta_1,

from the torus C / (Z + tau Z) onto the slot pair. The unknowns are the lattice
height |tau|, the pole height Im p, and the two critical points c1 (bottom circle)
and c2 (top circle) that map to the slot tips. The capacity is 2 / |tau|.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from ..common.constants import METHOD_TOLERANCES
from ..common.errors import CondcapError, ErrorCode, GeometryError, SolverError, SpecfunError
from ..common.types import CapacityResult, Family, Method
from ..geometry.spec import CondenserSpec
from ..specfun.theta import theta1_logderiv
from .newton import NewtonResult, continuation, damped_newton, fd_jacobian

logger = logging.getLogger("condcap.theta")

BOX_MARGIN = 1e-9


@dataclass(frozen=True)
class SlotPairGeometry:
    """Slots of half-lengths h1 (outer terminal) and h2 (inner terminal) at distance l."""

    l: float
    h1: float
    h2: float

    def __post_init__(self):
        if min(self.l, self.h1, self.h2) <= 0:
            raise GeometryError(ErrorCode.NONPOSITIVE_LENGTH, f"slot geometry must be positive: {self}")

    @classmethod
    def from_spec(cls, spec: CondenserSpec) -> "SlotPairGeometry":
        if spec.family is not Family.E:
            raise SolverError(ErrorCode.METHOD_SCOPE, f"theta method handles family E only, got {spec.family.value}")
        return cls(spec.x[1] - spec.x[0], spec.y[0], spec.y[1])


@dataclass(frozen=True)
class TorusParams:
    """tau = i T, p = i s, c1 real, c2 = x2 + tau / 2."""

    tau: complex
    p: complex
    c1: float
    c2: complex

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "TorusParams":
        t, s, c1, x2 = (float(e) for e in v)
        return cls(1j * t, 1j * s, c1, complex(x2, 0.5 * t))

    def to_vector(self) -> np.ndarray:
        return np.array([self.tau.imag, self.p.imag, self.c1, self.c2.real])


def _g(u: complex, tau: complex, order: int = 1) -> complex:
    try:
        return theta1_logderiv(u, tau, order)
    except SpecfunError as exc:
        if exc.code is ErrorCode.POLE_AT_LATTICE_POINT:
            raise SolverError(ErrorCode.POLE_AT_P, f"u = {u} hits a pole of the map", {"u": str(u)}) from exc
        raise


def sc_map_w(u: complex, params: TorusParams, l: float) -> complex:
    """
    Evaluate the slot map at a torus point.

    Example:
        >>> params = TorusParams(1j, 0.25j, 0.25, complex(0.25, 0.5))
        >>> abs(sc_map_w(0.3 + 0.2j, params, 1.0) - sc_map_w(1.3 + 0.2j, params, 1.0)) < 1e-12
        True
    """
    p, tau = params.p, params.tau
    return -(l / (2j * math.pi)) * (_g(u - p, tau) + _g(u + p, tau))


def sc_map_dw(u: complex, params: TorusParams, l: float) -> complex:
    p, tau = params.p, params.tau
    return -(l / (2j * math.pi)) * (_g(u - p, tau, 2) + _g(u + p, tau, 2))


def b_period(params: TorusParams, l: float, u: complex = 0.3 + 0.1j) -> complex:
    """Increment of w along the b-cycle, w(u + tau) - w(u); equals 2 l."""
    return sc_map_w(u + params.tau, params, l) - sc_map_w(u, params, l)


def residual_E(params: TorusParams, geom: SlotPairGeometry) -> np.ndarray:
    """
    Four real equations: w'(c1) = 0, w'(c2) = 0, Im w(c1) = h1, Im w(c2) = h2.

    On both circles only the real part of g'(c - p) + g'(c + p) can be nonzero.
    """
    p, tau = params.p, params.tau
    r1 = (_g(params.c1 - p, tau, 2) + _g(params.c1 + p, tau, 2)).real
    r2 = (_g(params.c2 - p, tau, 2) + _g(params.c2 + p, tau, 2)).real
    r3 = sc_map_w(params.c1, params, geom.l).imag - geom.h1
    r4 = sc_map_w(params.c2, params, geom.l).imag - geom.h2
    return np.array([r1, r2, r3, r4])


def _admissible(v: np.ndarray) -> bool:
    t, s, c1, x2 = v
    return (
        t > BOX_MARGIN
        and BOX_MARGIN < s < 0.5 * t - BOX_MARGIN
        and BOX_MARGIN < c1 < 0.5 - BOX_MARGIN
        and BOX_MARGIN < x2 < 0.5 - BOX_MARGIN
    )


def _critical_point(t: float, height: float) -> float:
    """Zero of Re g'(x - i height) on (0, 1/2), the tip preimage on a circle."""
    tau = 1j * t

    def slope(x: float) -> float:
        return _g(complex(x, -height), tau, 2).real

    lo, hi = 1e-6, 0.5 - 1e-6
    try:
        return brentq(slope, lo, hi, xtol=1e-14)
    except (ValueError, CondcapError):
        return 0.25


def initial_guess(geom: SlotPairGeometry, guess: str = "cot") -> TorusParams:
    """
    Starting parameters.

    ``"cot"`` uses the large-|tau| limit of the map, where g(u) ~ pi cot(pi u) and a
    slot tip sits at height l / sinh(2 pi Im p). ``"fd"`` derives |tau| from a coarse
    finite-difference capacity.
    """
    if guess == "fd":
        from .fd_oracle import capacity_fd
        from ..geometry.spec import parse_spec

        spec = parse_spec({"family": "E", "x": [0.0, geom.l], "y": [geom.h1, geom.h2]})
        try:
            t = 2.0 / capacity_fd(spec, tol=1e-2, box_factor=4.0, max_halvings=1).value
        except CondcapError:
            t = 1.0
        return TorusParams.from_vector(np.array([t, 0.25 * t, 0.25, 0.25]))
    a1 = math.asinh(geom.l / geom.h1)
    a2 = math.asinh(geom.l / geom.h2)
    t = (a1 + a2) / math.pi
    s = a1 / (2.0 * math.pi)
    c1 = _critical_point(t, s)
    x2 = _critical_point(t, s - 0.5 * t)
    return TorusParams.from_vector(np.array([t, s, c1, x2]))


def _realized(params: TorusParams, l: float) -> np.ndarray:
    return np.array([sc_map_w(params.c1, params, l).imag, sc_map_w(params.c2, params, l).imag])


def solve_E(
    geom: SlotPairGeometry,
    init: Optional[TorusParams] = None,
    tol: float = 1e-12,
    guess: str = "cot",
) -> TorusParams:
    return _solve(geom, init, tol, guess)[0]


def _solve(
    geom: SlotPairGeometry, init: Optional[TorusParams], tol: float, guess: str
) -> Tuple[TorusParams, NewtonResult, int]:
    start = init or initial_guess(geom, guess)
    x0 = start.to_vector()
    if not _admissible(x0):
        raise SolverError(ErrorCode.LEFT_DOMAIN, f"initial parameters {x0} are outside the box")

    def residual_at(heights: np.ndarray):
        target = SlotPairGeometry(geom.l, float(heights[0]), float(heights[1]))
        return lambda v: residual_E(TorusParams.from_vector(v), target)

    target = np.array([geom.h1, geom.h2])
    result = damped_newton(residual_at(target), x0, tol, admissible=_admissible)
    steps = 0
    if not result.converged:
        logger.warning(
            f"Direct Newton stalled for l={geom.l}, h=({geom.h1}, {geom.h2}) "
            f"at residual {result.residual_norm:.2e}; continuing from the initial geometry"
        )
        realized = _realized(start, geom.l)
        middle = np.full(2, 0.5 * (geom.h1 + geom.h2))
        x = x0
        for a, b in ((realized, middle), (middle, target)):
            result = continuation(residual_at, a, b, x, tol, admissible=_admissible)
            steps += result.iterations
            x = result.x
        result = damped_newton(residual_at(target), x, tol, admissible=_admissible)
        if not result.converged:
            raise SolverError(
                ErrorCode.NO_CONVERGENCE,
                f"theta system did not converge (residual {result.residual_norm:.2e})",
                {"l": geom.l, "h1": geom.h1, "h2": geom.h2},
            )
    return TorusParams.from_vector(result.x), result, steps


def capacity_E(
    geom: SlotPairGeometry,
    tol: float = METHOD_TOLERANCES[Method.THETA],
    init: Optional[TorusParams] = None,
    guess: str = "cot",
) -> CapacityResult:
    """
    Capacity of the slot pair, 2 / |tau|.

    Args:
        geom: slot distance and half-lengths.
        tol: requested relative accuracy (the residual is always driven to 1e-12).
        init: optional starting parameters.
        guess: "cot" (default) or "fd" initial guess.

    Returns:
        CapacityResult with the torus parameters in the diagnostics.

    Example:
        >>> round(capacity_E(SlotPairGeometry(5.0, 1.0, 2.0)).value, 10)
        1.5699432547
    """
    params, result, steps = _solve(geom, init, 1e-12, guess)
    t = params.tau.imag
    jacobian = result.jacobian
    if jacobian is None:
        jacobian = fd_jacobian(lambda v: residual_E(TorusParams.from_vector(v), geom), result.x)
    r = residual_E(params, geom)
    try:
        correction = np.linalg.solve(jacobian, r)
        err = abs(float(correction[0])) / t
    except np.linalg.LinAlgError:
        err = float(np.max(np.abs(r)))
    value = 2.0 / t
    logger.info(f"theta capacity {value:.15g} (|tau|={t:.15g}, residual {result.residual_norm:.1e})")
    if err > tol:
        logger.warning(f"theta error estimate {err:.1e} exceeds tolerance {tol:.1e}")
    return CapacityResult(
        value,
        Method.THETA,
        err,
        {
            "newton_iterations": result.iterations,
            "continuation_steps": steps,
            "tau": t,
            "p": params.p.imag,
            "c1": params.c1,
            "c2": params.c2.real,
            "residual_norm": result.residual_norm,
        },
    )
