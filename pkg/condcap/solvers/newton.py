"""
solvers/newton.py

Damped Newton iteration with a finite-difference Jacobian, and natural-parameter
continuation built on it. Both the theta solver and the SC parameter problem use
these; neither keeps state between calls.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..common.constants import (
    CONTINUATION_MIN_STEPS,
    FD_JACOBIAN_STEP,
    NEWTON_MAX_HALVINGS,
    NEWTON_MAX_ITER,
)
from ..common.errors import CondcapError, ErrorCode, SolverError

logger = logging.getLogger("condcap.newton")

Residual = Callable[[np.ndarray], np.ndarray]
Admissible = Callable[[np.ndarray], bool]


@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    jacobian: Optional[np.ndarray] = None


def fd_jacobian(fun: Residual, x: np.ndarray, step: float = FD_JACOBIAN_STEP) -> np.ndarray:
    """Central-difference Jacobian with a step relative to each coordinate."""
    x = np.asarray(x, dtype=float)
    columns = []
    for i in range(x.size):
        h = step * max(abs(x[i]), 1.0)
        forward, backward = x.copy(), x.copy()
        forward[i] += h
        backward[i] -= h
        columns.append((np.asarray(fun(forward)) - np.asarray(fun(backward))) / (2.0 * h))
    return np.column_stack(columns)


def _evaluate(fun: Residual, x: np.ndarray, admissible: Optional[Admissible]) -> Optional[np.ndarray]:
    if admissible is not None and not admissible(x):
        return None
    try:
        value = np.asarray(fun(x), dtype=float)
    except CondcapError as exc:
        logger.debug(f"Trial point rejected: {exc.code.value}")
        return None
    return value if np.all(np.isfinite(value)) else None


def damped_newton(
    fun: Residual,
    x0: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = NEWTON_MAX_ITER,
    max_halvings: int = NEWTON_MAX_HALVINGS,
    admissible: Optional[Admissible] = None,
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> NewtonResult:
    """
    Solve fun(x) = 0 by Newton steps halved until the max-norm residual decreases.

    A trial point that fails ``admissible`` or makes ``fun`` raise a CondcapError
    counts as a failed step and is halved as well.

    Args:
        fun: residual map R^n -> R^n.
        x0: starting point.
        tol: max-norm residual at which the iteration stops.
        max_iter: Newton iteration cap.
        max_halvings: step halvings allowed per iteration.
        admissible: optional box/domain predicate.
        jac: analytic Jacobian; central differences otherwise.

    Returns:
        NewtonResult with the last accepted iterate.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = _evaluate(fun, x, admissible)
    if r is None:
        raise SolverError(ErrorCode.LEFT_DOMAIN, "Newton start point is outside the admissible domain")
    norm = float(np.max(np.abs(r))) if r.size else 0.0
    jacobian = None
    for iteration in range(max_iter):
        if norm <= tol:
            return NewtonResult(x, norm, iteration, True, jacobian)
        jacobian = jac(x) if jac is not None else fd_jacobian(fun, x)
        try:
            dx = np.linalg.solve(jacobian, -r)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(jacobian, -r, rcond=None)[0]
        scale = 1.0
        for _ in range(max_halvings):
            trial = x + scale * dx
            r_trial = _evaluate(fun, trial, admissible)
            if r_trial is not None:
                norm_trial = float(np.max(np.abs(r_trial)))
                if norm_trial < norm:
                    x, r, norm = trial, r_trial, norm_trial
                    break
            scale *= 0.5
        else:
            logger.debug(f"Newton stalled at iteration {iteration}, residual {norm:.3e}")
            return NewtonResult(x, norm, iteration, False, jacobian)
        logger.debug(f"Newton iteration {iteration}: residual {norm:.3e}, step scale {scale:g}")
    return NewtonResult(x, norm, max_iter, norm <= tol, jacobian)


def continuation(
    fun_at: Callable[[np.ndarray], Residual],
    start: np.ndarray,
    end: np.ndarray,
    x0: np.ndarray,
    tol: float = 1e-12,
    steps: int = CONTINUATION_MIN_STEPS,
    admissible: Optional[Admissible] = None,
    max_refinements: int = 12,
) -> NewtonResult:
    """
    Follow the solution of fun_at(p)(x) = 0 along p = start + s (end - start), s in [0, 1].

    Each step starts Newton from a secant prediction. A failed step is retried with
    half the step length, at most ``max_refinements`` times in a row.

    Raises:
        SolverError(NO_CONVERGENCE) when a step cannot be completed.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    previous: Optional[np.ndarray] = None
    s, ds = 0.0, 1.0 / steps
    taken, refinements, total_iterations = 0, 0, 0
    result = NewtonResult(x, np.inf, 0, False)
    while s < 1.0:
        target = min(1.0, s + ds)
        guess = x if previous is None else x + (x - previous) * (target - s) / max(ds, 1e-300)
        if admissible is not None and not admissible(guess):
            guess = x
        try:
            result = damped_newton(fun_at(start + target * (end - start)), guess, tol, admissible=admissible)
        except SolverError:
            result = NewtonResult(x, np.inf, 0, False)
        total_iterations += result.iterations
        if result.converged:
            previous, x, s = x, result.x, target
            taken += 1
            refinements = 0
            continue
        refinements += 1
        if refinements > max_refinements:
            raise SolverError(
                ErrorCode.NO_CONVERGENCE,
                f"continuation stalled at s = {s:.6g} after {taken} steps",
                {"s": s, "steps": taken},
            )
        ds *= 0.5
        previous = None
    logger.debug(f"Continuation finished in {taken} steps, {total_iterations} Newton iterations")
    return NewtonResult(x, result.residual_norm, taken, True, result.jacobian)
