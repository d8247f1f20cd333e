"""
specfun/elliptic.py

Arithmetic-geometric mean and the complete elliptic integral quantities built on it.
"""

import logging
import math
from typing import Optional

import mpmath

from ..common.errors import ErrorCode, SpecfunError

logger = logging.getLogger("condcap.specfun")

AGM_MAX_STEPS = 64


def agm(a0: float, b0: float) -> float:
    """
    Arithmetic-geometric mean of two positive numbers.

    Example:
        >>> round(agm(1.0, math.sqrt(0.75)), 10)
        0.9318083917
    """
    if not (a0 > 0 and b0 > 0):
        raise SpecfunError(ErrorCode.DOMAIN, f"agm needs positive arguments, got ({a0}, {b0})")
    a, b = float(a0), float(b0)
    for _ in range(AGM_MAX_STEPS):
        if abs(a - b) <= 1e-16 * a:
            return a
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return a


def agm_extended(a0: float, b0: float, dps: int = 34) -> mpmath.mpf:
    with mpmath.workdps(dps):
        return mpmath.agm(mpmath.mpf(a0), mpmath.mpf(b0))


def complementary(k: float) -> float:
    """k' = sqrt(1 - k^2), formed as sqrt((1 - k)(1 + k))."""
    return math.sqrt((1.0 - k) * (1.0 + k))


def hyp_half(m: float) -> float:
    """
    Gauss hypergeometric value F(1/2, 1/2; 1; m) = 1 / AGM(1, sqrt(1 - m)).

    Args:
        m: parameter, m < 1 (negative values are allowed).

    Returns:
        2 K(sqrt(m)) / pi for 0 <= m < 1.
    """
    if m >= 1.0:
        raise SpecfunError(ErrorCode.DOMAIN, f"hyp_half needs m < 1, got {m}")
    return 1.0 / agm(1.0, math.sqrt(1.0 - m))


def ellipk(k: float) -> float:
    """Complete elliptic integral of the first kind K(k), 0 <= k < 1."""
    if not 0.0 <= k < 1.0:
        raise SpecfunError(ErrorCode.DOMAIN, f"ellipk needs 0 <= k < 1, got {k}")
    return math.pi / (2.0 * agm(1.0, complementary(k)))


def modulus_ratio(k: float, kp: Optional[float] = None) -> float:
    """
    K'(k) / K(k) = AGM(1, k') / AGM(1, k).

    Passing ``kp`` directly avoids forming 1 - k^2 when k is close to 1.
    """
    if kp is None:
        if not 0.0 < k < 1.0:
            raise SpecfunError(ErrorCode.DOMAIN, f"modulus_ratio needs 0 < k < 1, got {k}")
        kp = complementary(k)
    if not (k > 0 and kp > 0):
        raise SpecfunError(ErrorCode.DOMAIN, f"degenerate modulus pair ({k}, {kp})")
    return agm(1.0, kp) / agm(1.0, k)
