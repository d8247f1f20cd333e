"""
harness/dispatch.py

Method/family applicability rules and the single entry point that routes a spec to
its solver.
"""

import logging
from typing import Any, Mapping, Optional, Union

from ..common.constants import METHOD_TOLERANCES
from ..common.errors import CondcapError, ErrorCode, HarnessError
from ..common.types import CapacityResult, Family, Method, SolveOptions, Terminal
from ..geometry.contours import build_contours
from ..geometry.half_domain import half_domain
from ..geometry.spec import CondenserSpec, parse_spec
from ..solvers.bie_solver import capacity_bie
from ..solvers.fd_oracle import capacity_fd
from ..solvers.sc_solver import capacity_sc
from ..solvers.theta_solver import SlotPairGeometry, capacity_E

logger = logging.getLogger("condcap.dispatch")

ALL_FAMILIES = frozenset(Family)

METHOD_FAMILIES = {
    Method.THETA: frozenset({Family.E}),
    Method.SC: frozenset({Family.F, Family.G, Family.EXPLICIT}),
    Method.BIE: ALL_FAMILIES,
    Method.FD: ALL_FAMILIES,
}

ORIENTATION_CHECK_TOL = 1e-2


def _scope_error(spec: CondenserSpec, method: Method, reason: str) -> HarnessError:
    return HarnessError(
        ErrorCode.METHOD_SCOPE,
        f"method {method.value} does not apply to family {spec.family.value}: {reason}",
        {"family": spec.family.value, "method": method.value},
    )


def check_scope(spec: CondenserSpec, method: Method) -> None:
    """
    Reject a method/spec pair before any computation.

    Theta handles family E only. SC needs a doubly connected bounded condenser:
    families F and G, or an explicit spec with one outer and one inner contour.
    """
    if spec.family not in METHOD_FAMILIES[method]:
        raise _scope_error(spec, method, "family not supported")
    if method is Method.SC and spec.family is Family.EXPLICIT:
        cset = build_contours(spec)
        if not cset.bounded:
            raise _scope_error(spec, method, "unbounded condenser")
        if len(cset.by_terminal(Terminal.INNER)) != 1 or len(cset.by_terminal(Terminal.OUTER)) != 1:
            raise _scope_error(spec, method, "not doubly connected")


def compute(
    spec: Union[CondenserSpec, Mapping[str, Any], str],
    method: Union[Method, str],
    options: Optional[SolveOptions] = None,
) -> CapacityResult:
    """
    Capacity of a condenser by the requested method.

    Args:
        spec: a CondenserSpec, or a document accepted by ``parse_spec``.
        method: Method or its value ("theta", "sc", "bie", "fd").
        options: tol, level, h, scheme, strict, orientation_check, keep_density,
            max_unknowns.

    Returns:
        The solver's CapacityResult.

    Raises:
        HarnessError(METHOD_SCOPE) for inapplicable combinations; solver errors
        pass through with the method added to their context.

    Example:
        >>> from condcap.common.constants import REFERENCE_ROWS
        >>> round(compute(REFERENCE_ROWS["E1"]["spec"], "theta").value, 12)
        1.569943254749
    """
    spec = spec if isinstance(spec, CondenserSpec) else parse_spec(spec)
    method = Method(method)
    options = options or SolveOptions()
    check_scope(spec, method)
    tol = options.get("tol", METHOD_TOLERANCES[method])
    logger.debug(f"Dispatching family {spec.family.value} to {method.value} (tol {tol:g})")
    try:
        if method is Method.THETA:
            return capacity_E(SlotPairGeometry.from_spec(spec), tol=tol)
        if method is Method.SC:
            reference = None
            if options.get("orientation_check", False):
                reference = capacity_fd(spec, tol=ORIENTATION_CHECK_TOL).value
            return capacity_sc(half_domain(build_contours(spec)), tol=tol, reference=reference)
        if method is Method.BIE:
            return capacity_bie(
                spec,
                tol=tol,
                level=options.get("level", 0),
                scheme=options.get("scheme", "auto"),
                strict=options.get("strict", False),
                keep_density=options.get("keep_density", False),
                max_unknowns=options.get("max_unknowns"),
            )
        return capacity_fd(spec, h=options.get("h"), tol=tol)
    except CondcapError as exc:
        exc.context.setdefault("method", method.value)
        raise
