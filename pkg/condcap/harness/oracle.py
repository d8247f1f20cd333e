"""
harness/oracle.py

Extended-precision reference values for the special-function kernel, written as a
versioned JSON document by ``condcap oracle``. Values are decimal strings so no
digits are lost to binary floats.
"""

from typing import Any, Dict, List, Tuple

import mpmath

from ..specfun.elliptic import agm_extended
from ..specfun.theta import EXTENDED_DPS

ORACLE_VERSION = 1

THETA_POINTS: Tuple[Tuple[complex, complex], ...] = (
    (0.1 + 0.05j, 1j),
    (0.3 + 0.1j, 1j),
    (0.25 + 0.0j, 0.5j),
    (0.4 + 0.2j, 2j),
    (0.2 - 0.3j, 1.5j),
    (0.05 + 0.01j, 0.25j),
)

AGM_POINTS: Tuple[Tuple[float, float], ...] = (
    (1.0, 0.5),
    (1.0, 0.1),
    (1.0, 1e-8),
    (1.0, 0.9999),
    (2.0, 3.0),
)


def _text(value: Any) -> str:
    return mpmath.nstr(value, EXTENDED_DPS - 2)


def theta_values(u: complex, tau: complex, derivatives: int = 3) -> List[List[str]]:
    """[re, im] strings of theta_1^(d)(u | tau) for d = 0..derivatives-1, in the pi*u convention."""
    out = []
    with mpmath.workdps(EXTENDED_DPS):
        q = mpmath.exp(1j * mpmath.pi * mpmath.mpc(tau))
        z = mpmath.pi * mpmath.mpc(u)
        for d in range(derivatives):
            value = mpmath.jtheta(1, z, q, d) * mpmath.pi ** d
            out.append([_text(mpmath.re(value)), _text(mpmath.im(value))])
    return out


def build_oracle() -> Dict[str, Any]:
    """
    Example:
        >>> build_oracle()["agm"][0]["value"][:12]
        '0.7283955155'
    """
    return {
        "version": ORACLE_VERSION,
        "dps": EXTENDED_DPS,
        "theta1": [
            {"u": [u.real, u.imag], "tau": [tau.real, tau.imag], "values": theta_values(u, tau)}
            for u, tau in THETA_POINTS
        ],
        "agm": [{"a": a, "b": b, "value": _text(agm_extended(a, b, EXTENDED_DPS))} for a, b in AGM_POINTS],
    }
