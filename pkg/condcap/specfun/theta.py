"""
specfun/theta.py

Odd Jacobi theta function theta_1(u | tau) in the normalization with period 1 in u,
its derivatives and logarithmic derivatives. Double precision goes through the
q-series; ``precision="extended"`` evaluates the same quantities through mpmath.
"""

import cmath
import logging
import math
from typing import Tuple

import mpmath

from ..common.errors import ErrorCode, SpecfunError

logger = logging.getLogger("condcap.specfun")

SERIES_TOL = 1e-18
MAX_TERMS = 1000
EXTENDED_DPS = 34


def _check_tau(tau: complex) -> float:
    t = complex(tau).imag
    if not t > 0:
        raise SpecfunError(ErrorCode.NONCONVERGENT, f"theta series diverges for Im tau = {t}", {"tau": str(tau)})
    return t


def _series(u: complex, tau: complex, orders: Tuple[int, ...]) -> Tuple[complex, ...]:
    """Sum the derivative series of theta_1 for every requested order in one pass."""
    t = _check_tau(tau)
    u = complex(u)
    tau = complex(tau)
    sums = [0j] * len(orders)
    peak = [0.0] * len(orders)
    for k in range(MAX_TERMS):
        n = 2 * k + 1
        half = k + 0.5
        a = 1j * math.pi * tau * half * half
        plus = cmath.exp(a + 1j * math.pi * n * u)
        minus = cmath.exp(a - 1j * math.pi * n * u)
        sign = -1.0 if k % 2 else 1.0
        log_bound = math.log(2.0) - math.pi * t * half * half + 2.0 * math.pi * half * abs(u.imag)
        done = True
        for i, m in enumerate(orders):
            term = sign * (math.pi * n) ** m * ((1j ** m) * plus - ((-1j) ** m) * minus) / 1j
            sums[i] += term
            peak[i] = max(peak[i], abs(sums[i]))
            bound = math.exp(log_bound) * (math.pi * n) ** m if log_bound > -745.0 else 0.0
            if bound >= SERIES_TOL * max(peak[i], 1e-300):
                done = False
        if done:
            return tuple(sums)
    raise SpecfunError(ErrorCode.NONCONVERGENT, f"theta series did not settle in {MAX_TERMS} terms")


def _extended(u: complex, tau: complex, order: int) -> complex:
    _check_tau(tau)
    with mpmath.workdps(EXTENDED_DPS):
        q = mpmath.exp(1j * mpmath.pi * mpmath.mpc(tau))
        value = mpmath.jtheta(1, mpmath.pi * mpmath.mpc(u), q, order) * mpmath.pi ** order
        return complex(value)


def theta1(u: complex, tau: complex, derivative: int = 0, precision: str = "double") -> complex:
    """
    Evaluate theta_1(u | tau) = 2 sum (-1)^k q^{(k+1/2)^2} sin((2k+1) pi u), q = exp(i pi tau).

    Args:
        u: complex argument.
        tau: lattice parameter with positive imaginary part.
        derivative: order of the u-derivative (0 to 3).
        precision: "double" for the native series or "extended" for mpmath.

    Returns:
        The (differentiated) theta value.

    Example:
        >>> abs(theta1(0.0, 1j))
        0.0
    """
    if precision == "extended":
        return _extended(u, tau, derivative)
    return _series(u, tau, (derivative,))[0]


def _reduce(u: complex, tau: complex) -> Tuple[complex, int]:
    t = complex(tau).imag
    shift = round(complex(u).imag / t)
    v = complex(u) - shift * complex(tau)
    v -= math.floor(v.real + 0.5)
    return v, shift


def theta1_logderiv(u: complex, tau: complex, order: int = 1, precision: str = "double") -> complex:
    """
    Logarithmic derivative g = theta_1'/theta_1 (order 1) or its derivative g' (order 2).

    The argument is first reduced into the period cell around 0 using
    g(u + 1) = g(u) and g(u + n tau) = g(u) - 2 pi i n.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    _check_tau(tau)
    v, shift = _reduce(u, tau)
    if abs(v) < 1e-14:
        raise SpecfunError(
            ErrorCode.POLE_AT_LATTICE_POINT, f"theta_1 vanishes at u = {u}", {"u": str(u), "tau": str(tau)}
        )
    if precision == "extended":
        with mpmath.workdps(EXTENDED_DPS):
            q = mpmath.exp(1j * mpmath.pi * mpmath.mpc(tau))
            z = mpmath.pi * mpmath.mpc(v)
            th = [mpmath.jtheta(1, z, q, m) * mpmath.pi ** m for m in range(order + 1)]
            g = th[1] / th[0]
            value = g if order == 1 else th[2] / th[0] - g * g
            result = complex(value)
    else:
        th = _series(v, tau, tuple(range(order + 1)))
        g = th[1] / th[0]
        result = g if order == 1 else th[2] / th[0] - g * g
    if order == 1 and shift:
        result -= 2j * math.pi * shift
    return result
