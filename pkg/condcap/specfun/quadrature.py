"""
specfun/quadrature.py

Endpoint-singular quadrature: cached Gauss-Jacobi rules, the side integrals of a
Schwarz-Christoffel integrand, and the Lauricella function F_D through its Euler
integral.

Side integrals are evaluated in log form. Each interval is split at its midpoint and
each half is integrated from its endpoint outward on geometrically graded panels,
so that nodes crowding an endpoint from outside stay resolved.
"""

import logging
import math
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import betaln, logsumexp, roots_jacobi, roots_legendre

from ..common.constants import SC_QUADRATURE_ORDER
from ..common.errors import ErrorCode, SpecfunError

logger = logging.getLogger("condcap.specfun")

# (node t_j, exponent beta_j) pairs of an integrand prod |t - t_j|^beta_j
JacobiExponents = Sequence[Tuple[float, float]]
# (distance from the nearest interval endpoint, exponent) for nodes outside the interval
OffsetExponents = Sequence[Tuple[float, float]]

LAURICELLA_RTOL = 1e-13
SIDE_RTOL = 1e-12
LAURICELLA_SCHEDULE = ((4, 16), (8, 16), (16, 16), (24, 24), (32, 32), (48, 32), (64, 48))


@lru_cache(maxsize=256)
def gauss_jacobi(n: int, alpha: float, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights on [-1, 1] for the weight (1 - s)^alpha (1 + s)^beta.

    The arrays are shared between callers and returned read-only.
    """
    nodes, weights = roots_jacobi(n, alpha, beta)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _panels(half: float, reach: float) -> List[float]:
    """Breakpoints 0 < x_1 < ... = half graded toward 0; ``reach`` is the nearest outside node."""
    if not math.isfinite(reach):
        return [0.0, half]
    points = [0.0, min(2.0 * reach, half)]
    while points[-1] < half:
        points.append(min(3.0 * points[-1] + 2.0 * reach, half))
    return points


def _log_half(
    beta0: float,
    beta_far: float,
    length: float,
    near: OffsetExponents,
    far: OffsetExponents,
    order: int,
) -> float:
    """
    log of int_0^{length/2} x^beta0 (length - x)^beta_far prod_near (x + d)^b prod_far (length + d - x)^b dx.
    """
    half = 0.5 * length
    reach = min((d for d, _ in near), default=math.inf)
    points = _panels(half, reach)
    near_d = np.array([d for d, _ in near], dtype=float)
    near_b = np.array([b for _, b in near], dtype=float)
    far_d = np.array([d for d, _ in far], dtype=float)
    far_b = np.array([b for _, b in far], dtype=float)

    def smooth_log(x: np.ndarray) -> np.ndarray:
        value = beta_far * np.log(length - x)
        if near_d.size:
            value = value + np.log(x[:, None] + near_d[None, :]) @ near_b
        if far_d.size:
            value = value + np.log(length + far_d[None, :] - x[:, None]) @ far_b
        return value

    pieces = []
    s, w = gauss_jacobi(order, 0.0, beta0)
    x1 = points[1]
    x = 0.5 * x1 * (1.0 + s)
    pieces.append(logsumexp(np.log(w) + smooth_log(x)) + (beta0 + 1.0) * math.log(0.5 * x1))
    s, w = gauss_legendre(order)
    for a, b in zip(points[1:], points[2:]):
        x = a + 0.5 * (b - a) * (1.0 + s)
        pieces.append(logsumexp(np.log(w) + beta0 * np.log(x) + smooth_log(x)) + math.log(0.5 * (b - a)))
    return float(logsumexp(pieces))


def log_side_integral(
    length: float,
    beta_from: float,
    beta_to: float,
    behind: OffsetExponents = (),
    ahead: OffsetExponents = (),
    order: int = SC_QUADRATURE_ORDER,
) -> float:
    """
    log of int over an interval of prod |t - t_j|^beta_j, with nodes given by offsets.

    Args:
        length: interval length (to - from).
        beta_from: exponent of the node sitting at ``from``.
        beta_to: exponent of the node sitting at ``to``.
        behind: (distance before ``from``, exponent) for nodes left of the interval.
        ahead: (distance after ``to``, exponent) for nodes right of the interval.
        order: Gauss rule order per panel.

    Returns:
        The log of the (positive) modulus integral.
    """
    if beta_from <= -1.0 or beta_to <= -1.0:
        raise SpecfunError(
            ErrorCode.NONINTEGRABLE_ENDPOINT,
            f"endpoint exponents ({beta_from}, {beta_to}) must exceed -1",
        )
    if not length > 0:
        raise SpecfunError(ErrorCode.DOMAIN, f"side integral needs a positive length, got {length}")
    left = _log_half(beta_from, beta_to, length, behind, ahead, order)
    right = _log_half(beta_to, beta_from, length, ahead, behind, order)
    return float(np.logaddexp(left, right))


def _split_nodes(
    exps: JacobiExponents, t_from: float, t_to: float
) -> Tuple[float, float, List[Tuple[float, float]], List[Tuple[float, float]]]:
    beta_from = beta_to = 0.0
    behind, ahead = [], []
    for t, beta in exps:
        if not math.isfinite(t):
            continue
        if t == t_from:
            beta_from += beta
        elif t == t_to:
            beta_to += beta
        elif t < t_from:
            behind.append((t_from - t, beta))
        elif t > t_to:
            ahead.append((t - t_to, beta))
        else:
            raise SpecfunError(
                ErrorCode.NODE_INSIDE_INTERVAL, f"node {t} lies inside [{t_from}, {t_to}]", {"node": t}
            )
    return beta_from, beta_to, behind, ahead


def sc_side_integral(
    exps: JacobiExponents,
    t_from: float,
    t_to: float,
    scale: complex = 1.0,
    order: int = SC_QUADRATURE_ORDER,
    max_order: Optional[int] = None,
) -> complex:
    """
    scale * int_{t_from}^{t_to} prod_j |t - t_j|^beta_j dt.

    The panel rule order is doubled until two successive values agree to
    ``SIDE_RTOL``.

    Args:
        exps: (node, exponent) pairs; infinite nodes are ignored.
        t_from: left end of the interval.
        t_to: right end; no node may lie strictly between the ends.
        scale: complex factor applied to the result.
        order: Gauss rule order per panel to start from.
        max_order: highest order tried (8 x order by default).

    Returns:
        The scaled modulus integral. The branch factor of the SC integrand on
        this side is available from ``side_phase``.

    Raises:
        SpecfunError(QUADRATURE_STALL) when the values still differ at ``max_order``.

    Example:
        >>> round(sc_side_integral([(0.0, -0.5), (1.0, -0.5)], 0.0, 1.0).real, 12)
        3.14159265359
    """
    if not t_to > t_from:
        raise SpecfunError(ErrorCode.DOMAIN, f"empty interval [{t_from}, {t_to}]")
    beta_from, beta_to, behind, ahead = _split_nodes(exps, t_from, t_to)
    length = t_to - t_from
    limit = max_order or 8 * order
    log_value = log_side_integral(length, beta_from, beta_to, behind, ahead, order)
    change = math.inf
    while 2 * order <= limit:
        order *= 2
        refined = log_side_integral(length, beta_from, beta_to, behind, ahead, order)
        change = math.expm1(refined - log_value)
        log_value = refined
        if abs(change) <= SIDE_RTOL:
            return scale * math.exp(log_value)
        logger.debug(f"Side integral on [{t_from}, {t_to}] changed by {change:.2e} at order {order}")
    raise SpecfunError(
        ErrorCode.QUADRATURE_STALL,
        f"side integral on [{t_from}, {t_to}] did not settle by order {order} (last change {change:.2e})",
        {"t_from": t_from, "t_to": t_to, "order": order},
    )


def side_phase(exps: JacobiExponents, t_to: float) -> complex:
    """Branch factor exp(i pi sum beta_j) over the nodes at or right of ``t_to``."""
    total = sum(beta for t, beta in exps if math.isfinite(t) and t >= t_to)
    return complex(math.cos(math.pi * total), math.sin(math.pi * total))


def _euler_integral(
    a: np.ndarray, b: float, c: float, x: np.ndarray, depth: int, order: int
) -> float:
    """int_0^1 t^(b-1) (1-t)^(c-b-1) prod (1 - x_j t)^(-a_j) dt on dyadic panels toward both ends."""
    def factor(t: np.ndarray) -> np.ndarray:
        if not x.size:
            return np.ones_like(t)
        return np.exp(np.log1p(-np.outer(t, x)) @ (-a))

    edge = 2.0 ** -depth
    total = 0.0
    s, w = gauss_jacobi(order, 0.0, b - 1.0)
    t = 0.5 * edge * (1.0 + s)
    total += (0.5 * edge) ** b * float(np.sum(w * (1.0 - t) ** (c - b - 1.0) * factor(t)))
    s, w = gauss_jacobi(order, c - b - 1.0, 0.0)
    t = 1.0 - 0.5 * edge * (1.0 - s)
    total += (0.5 * edge) ** (c - b) * float(np.sum(w * t ** (b - 1.0) * factor(t)))

    inner = [2.0 ** -k for k in range(depth, 0, -1)]
    breaks = inner + [1.0 - p for p in reversed(inner[:-1])]
    s, w = gauss_legendre(order)
    for lo, hi in zip(breaks, breaks[1:]):
        t = lo + 0.5 * (hi - lo) * (1.0 + s)
        f = t ** (b - 1.0) * (1.0 - t) ** (c - b - 1.0) * factor(t)
        total += 0.5 * (hi - lo) * float(np.sum(w * f))
    return total


def lauricella_fd(a: Sequence[float], b: float, c: float, x: Sequence[float]) -> float:
    """
    Lauricella F_D(a; b, c; x) from its Euler integral.

    Args:
        a: exponents a_j, one per variable.
        b: 0 < b < c.
        c: second parameter.
        x: variables, each < 1.

    Returns:
        Gamma(c) / (Gamma(b) Gamma(c - b)) * int_0^1 t^(b-1) (1-t)^(c-b-1) prod (1 - x_j t)^(-a_j) dt

    Example:
        >>> round(lauricella_fd([0.5], 0.5, 1.0, [0.5]), 9)
        1.180340599
    """
    a_arr = np.asarray(a, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if a_arr.shape != x_arr.shape:
        raise SpecfunError(ErrorCode.PARAM_DOMAIN, "a and x must have the same length")
    if not 0.0 < b < c or np.any(x_arr >= 1.0):
        raise SpecfunError(
            ErrorCode.PARAM_DOMAIN, f"F_D needs 0 < b < c and x_j < 1 (b={b}, c={c}, x={list(x_arr)})"
        )
    norm = math.exp(-betaln(b, c - b))
    previous: Optional[float] = None
    change = math.inf
    for depth, order in LAURICELLA_SCHEDULE:
        value = norm * _euler_integral(a_arr, b, c, x_arr, depth, order)
        if previous is not None:
            change = abs(value - previous)
            if change <= LAURICELLA_RTOL * abs(value):
                return value
        previous = value
    raise SpecfunError(
        ErrorCode.QUADRATURE_STALL,
        f"F_D refinement did not settle (last change {change:.2e})",
        {"a": list(a_arr), "b": b, "c": c, "x": list(x_arr)},
    )
