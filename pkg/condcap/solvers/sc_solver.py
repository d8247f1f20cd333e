"""
solvers/sc_solver.py

Capacity of doubly connected condensers whose half domain is a polygon with four
arcs N0, F1, N1, F0. The Schwarz-Christoffel map from the upper half-plane onto the
half domain is fixed by its prevertices; the preimages of the four arc endpoints
are then sent to (-1, 1, 1/k, -1/k), which maps the half domain onto a rectangle
of width 2K(k) and height K'(k). The full-plane capacity is K'(k)/K(k).

Prevertices are carried as log gaps between neighbours so that crowded clusters
keep their relative precision.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import betaln

from ..common.constants import CROWDING_GAP, METHOD_TOLERANCES, SC_QUADRATURE_ORDER
from ..common.errors import ErrorCode, SolverError
from ..common.types import Arc, ArcLabel, CapacityResult, HalfDomainPolygon, Method
from ..specfun.elliptic import modulus_ratio
from ..specfun.quadrature import lauricella_fd, log_side_integral, side_phase
from .newton import continuation, damped_newton, fd_jacobian

logger = logging.getLogger("condcap.sc")

LOG_CROWDING = math.log(CROWDING_GAP)


@dataclass(frozen=True)
class SCParams:
    """
    Solved parameter problem.

    ``order[r]`` is the polygon vertex index carrying prevertex r; prevertex 0 sits
    at infinity, prevertex 1 at 0 and prevertex 2 at 1. ``gaps[r]`` is
    zeta_{r+1} - zeta_r for r >= 1 (``gaps[0]`` is unused).
    """

    order: Tuple[int, ...]
    betas: Tuple[float, ...]
    gaps: Tuple[float, ...]
    c0: complex

    @property
    def prevertices(self) -> Tuple[float, ...]:
        return (math.inf, 0.0) + tuple(float(v) for v in np.cumsum(self.gaps[1:]))

    def distance(self, a: int, b: int) -> float:
        """zeta_b - zeta_a for finite prevertices a < b, summed from gaps."""
        return float(sum(self.gaps[a:b]))


def _four_arcs(poly: HalfDomainPolygon) -> Tuple[Arc, Arc, Arc, Arc]:
    """Arcs N0, F1, N1, F0 in boundary order, N0 starting at the leftmost axis point."""
    n_arcs = poly.arcs_with(ArcLabel.N)
    if len(n_arcs) != 2 or len(poly.arcs) != 4:
        raise SolverError(
            ErrorCode.WRONG_ARC_COUNT,
            f"expected two N arcs among four, found {len(n_arcs)} among {len(poly.arcs)}",
        )
    n0 = min(n_arcs, key=lambda arc: (poly.vertices[arc.start].real, poly.vertices[arc.start].imag))
    i = poly.arcs.index(n0)
    arcs = tuple(poly.arcs[(i + m) % 4] for m in range(4))
    if [a.label for a in arcs] != [ArcLabel.N, ArcLabel.F1, ArcLabel.N, ArcLabel.F0]:
        raise SolverError(ErrorCode.WRONG_ARC_COUNT, "arcs are not ordered N0, F1, N1, F0")
    return arcs


def renumber(poly: HalfDomainPolygon) -> Tuple[int, ...]:
    """Vertex order starting one vertex before the start of N0."""
    if not poly.bounded:
        raise SolverError(ErrorCode.METHOD_SCOPE, "the SC solver needs a bounded half domain")
    n0 = _four_arcs(poly)[0]
    k = poly.size
    first = (n0.start - 1) % k
    return tuple((first + r) % k for r in range(k))


def _side_log_integral(gaps: np.ndarray, betas: np.ndarray, r: int, order: int) -> float:
    """log of the modulus integral over side r (zeta_r to zeta_{r+1}), 1 <= r <= K-2."""
    k = betas.size
    behind = list(zip(np.cumsum(gaps[r - 1:0:-1]), betas[r - 1:0:-1]))
    ahead = list(zip(np.cumsum(gaps[r + 1:k - 1]), betas[r + 2:k]))
    return log_side_integral(float(gaps[r]), float(betas[r]), float(betas[r + 1]), behind, ahead, order)


def _gaps(log_gaps: np.ndarray) -> np.ndarray:
    return np.concatenate(([np.nan, 1.0], np.exp(log_gaps)))


def _log_ratios(log_gaps: np.ndarray, betas: np.ndarray, order: int) -> np.ndarray:
    gaps = _gaps(log_gaps)
    logs = np.array([_side_log_integral(gaps, betas, r, order) for r in range(1, betas.size - 1)])
    return logs[1:] - logs[0]


def _initial_log_gaps(poly: HalfDomainPolygon, order: Sequence[int]) -> np.ndarray:
    """Prevertices from arclength, zeta = -cot(pi s / P), normalized to 0 and 1."""
    k = len(order)
    lengths = np.array([poly.side_length(order[r]) for r in range(k)])
    s = np.concatenate(([0.0], np.cumsum(lengths[:-1]))) / lengths.sum()
    zeta = -1.0 / np.tan(np.pi * s[1:])
    zeta = (zeta - zeta[0]) / (zeta[1] - zeta[0])
    return np.log(np.diff(zeta)[1:])


def _admissible(log_gaps: np.ndarray) -> bool:
    return bool(np.all(log_gaps > LOG_CROWDING) and np.all(log_gaps < 700.0))


def solve_parameter_problem(
    poly: HalfDomainPolygon, tol: float = 1e-12, order: int = SC_QUADRATURE_ORDER
) -> SCParams:
    """
    Find prevertices reproducing the side-length ratios of the half domain.

    Args:
        poly: bounded half-domain polygon with arcs N0, F1, N1, F0.
        tol: max-norm tolerance on the log side-length residuals.
        order: Gauss rule order for the side integrals.

    Returns:
        SCParams with the scale constant C0 fixed by the side from prevertex 1 to 2.
    """
    vertex_order = renumber(poly)
    k = len(vertex_order)
    betas = np.array([poly.angles[v] - 1.0 for v in vertex_order])
    lengths = np.array([poly.side_length(vertex_order[r]) for r in range(k)])
    target = np.log(lengths[2:k - 1] / lengths[1])

    def residual_at(goal: np.ndarray):
        return lambda lg: _log_ratios(lg, betas, order) - goal

    x0 = _initial_log_gaps(poly, vertex_order)
    steps = 0
    if k > 3:
        result = damped_newton(residual_at(target), x0, tol, admissible=_admissible)
        if not result.converged:
            logger.warning(
                f"SC Newton stalled at residual {result.residual_norm:.2e}; continuing in side-length ratios"
            )
            realized = _log_ratios(x0, betas, order)
            result = continuation(residual_at, realized, target, x0, tol, admissible=_admissible)
            steps = result.iterations
            result = damped_newton(residual_at(target), result.x, tol, admissible=_admissible)
            if not result.converged:
                raise SolverError(
                    ErrorCode.NO_CONVERGENCE,
                    f"SC parameter problem did not converge (residual {result.residual_norm:.2e})",
                )
        log_gaps = result.x
    else:
        log_gaps = np.zeros(0)
    if np.any(log_gaps < LOG_CROWDING):
        raise SolverError(ErrorCode.CROWDING, "prevertex gaps fell below the representable range")

    gaps = _gaps(log_gaps)
    prevertices = np.concatenate(([math.inf, 0.0], np.cumsum(gaps[1:])))
    exps = list(zip(prevertices[1:], betas[1:]))
    integral = math.exp(_side_log_integral(gaps, betas, 1, order))
    z1, z2 = poly.vertices[vertex_order[1]], poly.vertices[vertex_order[2]]
    c0 = (z2 - z1) / (integral * side_phase(exps, 1.0))
    logger.debug(f"SC prevertices solved for K={k} after {steps} continuation steps")
    return SCParams(tuple(vertex_order), tuple(betas), tuple(gaps), complex(c0))


def n_endpoint_preimages(poly: HalfDomainPolygon, params: SCParams) -> Tuple[float, float, float, float]:
    """Prevertices of F0 ∩ N0, N0 ∩ F1, F1 ∩ N1 and N1 ∩ F0, in that order."""
    n0, f1, n1, f0 = _four_arcs(poly)
    position = {v: r for r, v in enumerate(params.order)}
    zeta = params.prevertices
    return tuple(zeta[position[arc.start]] for arc in (n0, f1, n1, f0))


def _modulus_from_kappa(kappa_minus_one: float) -> Tuple[float, float]:
    if not (kappa_minus_one > 0 and math.isfinite(kappa_minus_one)):
        raise SolverError(ErrorCode.DEGENERATE, f"cross ratio {kappa_minus_one} does not describe four distinct ordered points")
    root = math.sqrt(kappa_minus_one + 1.0)
    k = kappa_minus_one / (root + 1.0) ** 2
    kp = 2.0 * math.sqrt(root) / (root + 1.0)
    return k, kp


def moebius_modulus(points: Sequence[float]) -> Tuple[float, float]:
    """
    Modulus k (and k') of the Moebius image (-1, 1, 1/k, -1/k) of four cyclically ordered points.

    Entries may be ``math.inf``.

    Example:
        >>> moebius_modulus((-1.0, 1.0, 2.0, -2.0))[0]
        0.5
    """
    z1, z2, z3, z4 = (float(z) for z in points)
    finite = [z for z in (z1, z2, z3, z4) if math.isfinite(z)]
    if len(finite) < 3 or len(set(finite)) != len(finite):
        raise SolverError(ErrorCode.DEGENERATE, f"points {tuple(points)} are not four distinct points")
    if math.isinf(z1):
        kappa = (z4 - z3) / (z3 - z2)
    elif math.isinf(z2):
        kappa = -(z4 - z3) / (z4 - z1)
    elif math.isinf(z3):
        kappa = -(z2 - z1) / (z4 - z1)
    elif math.isinf(z4):
        kappa = (z2 - z1) / (z3 - z2)
    else:
        kappa = (z2 - z1) * (z4 - z3) / ((z4 - z1) * (z3 - z2))
    return _modulus_from_kappa(kappa)


def _modulus_from_params(poly: HalfDomainPolygon, params: SCParams) -> Tuple[float, float]:
    """moebius_modulus evaluated on gap sums."""
    n0, f1, n1, f0 = _four_arcs(poly)
    position = {v: r for r, v in enumerate(params.order)}
    a, b, c, d = (position[arc.start] for arc in (n0, f1, n1, f0))
    if d == 0:
        kappa = params.distance(a, b) / params.distance(b, c)
    else:
        kappa = params.distance(a, b) * params.distance(c, d) / (params.distance(a, d) * params.distance(b, c))
    return _modulus_from_kappa(kappa)


def lauricella_check(
    params: SCParams, poly: HalfDomainPolygon, sides: Optional[Sequence[int]] = None
) -> List[Tuple[int, float]]:
    """
    Recompute side integrals through F_D and compare with the quadrature values.

    Returns:
        (side index r, relative difference) for every checked side.
    """
    k = len(params.order)
    betas = np.array(params.betas)
    gaps = np.array(params.gaps)
    zeta = params.prevertices
    checked = []
    for r in sides if sides is not None else range(1, k - 1):
        d = gaps[r]
        others = [j for j in range(1, k) if j not in (r, r + 1)]
        x = [d / (zeta[j] - zeta[r]) for j in others]
        a = [-betas[j] for j in others]
        b, c = betas[r] + 1.0, betas[r] + betas[r + 1] + 2.0
        log_prefix = (1.0 + betas[r] + betas[r + 1]) * math.log(d) + sum(
            betas[j] * math.log(abs(zeta[r] - zeta[j])) for j in others
        )
        log_fd = log_prefix + betaln(b, c - b) + math.log(lauricella_fd(a, b, c, x))
        log_quad = _side_log_integral(gaps, betas, r, SC_QUADRATURE_ORDER)
        checked.append((r, abs(math.expm1(log_fd - log_quad))))
    return checked


def _capacity_at(poly: HalfDomainPolygon, params: SCParams) -> float:
    k, kp = _modulus_from_params(poly, params)
    return modulus_ratio(k, kp)


def capacity_sc(
    poly: HalfDomainPolygon,
    tol: float = METHOD_TOLERANCES[Method.SC],
    reference: Optional[float] = None,
    check: bool = False,
) -> CapacityResult:
    """
    Capacity K'(k)/K(k) of a doubly connected half domain.

    Args:
        poly: half-domain polygon.
        tol: requested relative accuracy, used for the diagnostics only.
        reference: coarse capacity from another method; when its distance to the
            reciprocal of the result is smaller, the arc orientation was flipped.
        check: also run ``lauricella_check`` on every side.

    Returns:
        CapacityResult with the modulus and solve statistics in the diagnostics.
    """
    params = solve_parameter_problem(poly)
    k, kp = _modulus_from_params(poly, params)
    value = modulus_ratio(k, kp)
    if reference is not None and abs(1.0 / value - reference) < abs(value - reference):
        raise SolverError(
            ErrorCode.ORIENTATION_FLIP,
            f"SC capacity {value:.6g} disagrees with reference {reference:.6g}; its reciprocal matches",
        )

    order = params.order
    betas = np.array(params.betas)
    log_gaps = np.log(np.array(params.gaps[2:]))
    err = 1e-15
    if log_gaps.size:
        lengths = np.array([poly.side_length(order[r]) for r in range(len(order))])
        target = np.log(lengths[2:-1] / lengths[1])

        def fun(lg: np.ndarray) -> np.ndarray:
            return _log_ratios(lg, betas, SC_QUADRATURE_ORDER) - target

        r = fun(log_gaps)
        try:
            delta = np.linalg.solve(fd_jacobian(fun, log_gaps), r)
            shifted = SCParams(order, params.betas, tuple(_gaps(log_gaps - delta)), params.c0)
            err = max(err, abs(_capacity_at(poly, shifted) - value) / value)
        except np.linalg.LinAlgError:
            err = float(np.max(np.abs(r)))

    diagnostics = {"k": k, "k_prime": kp, "vertices": poly.size, "min_log_gap": float(min(log_gaps, default=0.0))}
    if check:
        deviations = lauricella_check(params, poly)
        diagnostics["lauricella_max_deviation"] = max((d for _, d in deviations), default=0.0)
    logger.info(f"SC capacity {value:.15g} (k={k:.6g}, K={poly.size})")
    if err > tol:
        logger.warning(f"SC error estimate {err:.1e} exceeds tolerance {tol:.1e}")
    return CapacityResult(value, Method.SC, err, diagnostics)
