"""
solvers/fd_oracle.py

Low-accuracy capacity oracle: the five-point Laplacian on a uniform grid, plates
clamped to their potentials, capacity read off the discrete Dirichlet energy

    cap ~ sum over grid edges (u_a - u_b)^2,

and Richardson-extrapolated over successive halvings of the step. Unbounded
condensers are cut off by a box whose walls are a third conductor. By default the
walls float at the potential that leaves them without net charge (the discrete
counterpart of zero total charge at infinity); a fixed wall potential, 0 for the
plain grounded box, can be requested instead. The box bias is estimated by solving
again in a box twice as wide.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
import shapely
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import cg, spsolve

from ..common.constants import (
    FD_BOX_BIAS_RTOL,
    FD_BOX_FACTOR,
    FD_CG_RTOL,
    FD_FEATURE_DIVISOR,
    METHOD_TOLERANCES,
    get_fd_node_limit,
)
from ..common.errors import ErrorCode, SolverError
from ..common.types import CapacityResult, ContourSet, Method, NodeClass, Terminal
from ..geometry.contours import build_contours, contour_lines, contour_region, min_feature_size
from ..geometry.spec import CondenserSpec

logger = logging.getLogger("condcap.fd")

PLATE_CLASS = {Terminal.OUTER: NodeClass.PLATE0, Terminal.INNER: NodeClass.PLATE1}


@dataclass
class GridProblem:
    """Uniform grid x0 + i h, y0 + j h with one NodeClass per node (rows are j)."""

    x0: float
    y0: float
    h: float
    classes: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.classes.shape

    @property
    def nodes(self) -> int:
        return int(self.classes.size)

    @property
    def walled(self) -> bool:
        return bool((self.classes == NodeClass.WALL.value).any())

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        ny, nx = self.shape
        return np.meshgrid(self.x0 + self.h * np.arange(nx), self.y0 + self.h * np.arange(ny))

    def values(self, wall: float = 0.0) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.classes == NodeClass.PLATE1.value] = 1.0
        out[self.classes == NodeClass.WALL.value] = wall
        return out


def _bounds(cset: ContourSet, box_factor: float) -> Tuple[float, float, float, float]:
    geoms = [contour_lines(c) for c in cset.contours]
    if cset.bounded:
        outer = [g for g, c in zip(geoms, cset.contours) if c.orientation > 0]
        return shapely.total_bounds(outer)
    minx, miny, maxx, maxy = shapely.total_bounds(geoms)
    cx, cy = 0.5 * (minx + maxx), 0.5 * (miny + maxy)
    half = box_factor * max(maxx - minx, maxy - miny)
    return cx - half, cy - half, cx + half, cy + half


def grid_layout(cset: ContourSet, h: float, box_factor: float = FD_BOX_FACTOR) -> Tuple[float, float, int, int]:
    """Origin and node counts (x0, y0, nx, ny) of the grid with step h."""
    minx, miny, maxx, maxy = _bounds(cset, box_factor)
    x0 = h * math.floor(minx / h) - h
    y0 = h * math.floor(miny / h) - h
    return x0, y0, int(math.ceil((maxx - x0) / h)) + 2, int(math.ceil((maxy - y0) / h)) + 2


def build_grid(cset: ContourSet, h: float, box_factor: float = FD_BOX_FACTOR) -> GridProblem:
    """
    Classify grid nodes: plate nodes within h/2 of a contour, nodes enclosed by a
    hole contour take its terminal's value, nodes outside the outer contour are dropped.
    For unbounded condensers the outermost ring of nodes becomes the box wall.

    Raises:
        SolverError(OOM_GUARD) when the grid exceeds CONDCAP_FD_NODE_LIMIT nodes.
    """
    x0, y0, nx, ny = grid_layout(cset, h, box_factor)
    limit = get_fd_node_limit()
    if nx * ny > limit:
        raise SolverError(
            ErrorCode.OOM_GUARD,
            f"grid of {nx} x {ny} nodes exceeds the limit of {limit}",
            {"nx": nx, "ny": ny, "h": h, "limit": limit},
        )
    xs, ys = np.meshgrid(x0 + h * np.arange(nx), y0 + h * np.arange(ny))
    points = shapely.points(xs.ravel(), ys.ravel())
    classes = np.full(xs.size, NodeClass.INTERIOR.value)
    nearest = np.full(xs.size, np.inf)

    for contour in cset.contours:
        plate = PLATE_CLASS[contour.terminal].value
        region = contour_region(contour)
        if region is not None:
            inside = shapely.contains_xy(region, xs.ravel(), ys.ravel())
            if contour.orientation > 0:
                classes[~inside & (classes == NodeClass.INTERIOR.value)] = NodeClass.EXTERIOR.value
            else:
                classes[inside] = plate
        distance = shapely.distance(contour_lines(contour), points)
        clamp = (distance <= 0.5 * h) & (distance < nearest)
        classes[clamp] = plate
        nearest = np.minimum(nearest, distance)

    classes = classes.reshape(ny, nx)
    if not cset.bounded:
        ring = np.zeros(classes.shape, dtype=bool)
        ring[[0, -1], :] = True
        ring[:, [0, -1]] = True
        classes[ring & (classes == NodeClass.INTERIOR.value)] = NodeClass.WALL.value
    return GridProblem(x0, y0, h, classes)


def _edges(grid: GridProblem) -> Tuple[np.ndarray, np.ndarray]:
    ny, nx = grid.shape
    index = np.arange(grid.nodes).reshape(ny, nx)
    active = grid.classes != NodeClass.EXTERIOR.value
    horizontal = active[:, :-1] & active[:, 1:]
    vertical = active[:-1, :] & active[1:, :]
    first = np.concatenate([index[:, :-1][horizontal], index[:-1, :][vertical]])
    second = np.concatenate([index[:, 1:][horizontal], index[1:, :][vertical]])
    return first, second


def _energy_form(edges: Tuple[np.ndarray, np.ndarray], u: np.ndarray, v: np.ndarray) -> float:
    first, second = edges
    u, v = u.ravel(), v.ravel()
    return float(np.sum((u[first] - u[second]) * (v[first] - v[second])))


def solve_grid(grid: GridProblem, values: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float, int]:
    """
    Harmonic grid function with the given values on the fixed nodes (the plate
    values and walls at 0 by default); returns (u, energy, CG iterations).

    Interior nodes in a component that touches no fixed node keep u = 0.
    """
    edges = _edges(grid)
    first, second = edges
    n = grid.nodes
    ones = np.ones(first.size)
    adjacency = coo_matrix(
        (np.concatenate([ones, ones]), (np.concatenate([first, second]), np.concatenate([second, first]))),
        shape=(n, n),
    ).tocsr()
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    u = (grid.values() if values is None else np.array(values, dtype=float)).ravel()
    free = np.flatnonzero((grid.classes.ravel() == NodeClass.INTERIOR.value) & (degree > 0))
    fixed = np.flatnonzero(grid.classes.ravel() != NodeClass.INTERIOR.value)

    laplacian = (coo_matrix((degree, (np.arange(n), np.arange(n))), shape=(n, n)).tocsr() - adjacency)
    system = laplacian[free][:, free]
    rhs = -(laplacian[free][:, fixed] @ u[fixed])

    iterations = [0]

    def count(_):
        iterations[0] += 1

    solution, info = cg(system, rhs, rtol=FD_CG_RTOL, maxiter=10 * max(free.size, 1), callback=count)
    if info != 0:
        logger.warning(f"CG did not reach rtol {FD_CG_RTOL:g} (info={info}); solving directly")
        solution = spsolve(system.tocsc(), rhs)
    u[free] = solution
    return u.reshape(grid.shape), _energy_form(edges, u, u), iterations[0]


def solve_box(grid: GridProblem, wall: Optional[float] = None) -> Tuple[np.ndarray, float, int, float]:
    """
    Harmonic grid function of a walled grid; returns (u, energy, CG iterations, wall potential).

    With ``wall`` None the walls take the potential c minimizing the energy of
    u0 + c u1, where u0 has the walls at 0 and u1 is 1 on the walls and 0 on the
    plates; that c leaves the walls without net charge.
    """
    if wall is not None:
        u, energy, iterations = solve_grid(grid, grid.values(wall))
        return u, energy, iterations, wall
    u0, energy0, iterations = solve_grid(grid)
    walls = (grid.classes == NodeClass.WALL.value).astype(float)
    u1, energy1, more = solve_grid(grid, walls)
    cross = _energy_form(_edges(grid), u0, u1)
    potential = min(max(-cross / energy1, 0.0), 1.0)
    u = u0 + potential * u1
    energy = energy0 + 2.0 * potential * cross + potential * potential * energy1
    logger.debug(f"Floating walls at {potential:.6f} (grounded-box energy {energy0:.8g})")
    return u, energy, iterations + more, potential


def _solve(grid: GridProblem, wall: Optional[float]) -> Tuple[np.ndarray, float, int, Optional[float]]:
    if grid.walled:
        return solve_box(grid, wall)
    u, energy, iterations = solve_grid(grid)
    return u, energy, iterations, None


def _contour_set(target: Union[CondenserSpec, ContourSet]) -> ContourSet:
    return target if isinstance(target, ContourSet) else build_contours(target)


def default_step(cset: ContourSet) -> float:
    return min_feature_size(cset) / FD_FEATURE_DIVISOR


def fd_levels(
    target: Union[CondenserSpec, ContourSet],
    h: Optional[float] = None,
    levels: int = 3,
    box_factor: float = FD_BOX_FACTOR,
    wall: Optional[float] = None,
) -> List[Tuple[float, float]]:
    """
    (h, capacity) for ``levels`` successive halvings of the step.

    A change of direction between successive differences is logged as a warning.
    """
    cset = _contour_set(target)
    step = h or default_step(cset)
    out = []
    for k in range(levels):
        grid = build_grid(cset, step / 2 ** k, box_factor)
        out.append((grid.h, _solve(grid, wall)[1]))
    diffs = [b[1] - a[1] for a, b in zip(out, out[1:])]
    if any(d1 * d2 < 0 for d1, d2 in zip(diffs, diffs[1:])):
        logger.warning(f"FD capacities are not monotone over the step halvings: {[c for _, c in out]}")
    return out


def box_bias(
    cset: ContourSet, h: float, value: float, box_factor: float = FD_BOX_FACTOR, wall: Optional[float] = None
) -> Optional[float]:
    """
    Relative change of the step-h capacity ``value`` when the box is made twice as wide.

    Returns None when the wider grid exceeds the node limit.
    """
    try:
        wide = build_grid(cset, h, 2.0 * box_factor)
    except SolverError as exc:
        if exc.code is not ErrorCode.OOM_GUARD:
            raise
        logger.warning(f"Box bias not estimated: {exc.message}")
        return None
    wider = _solve(wide, wall)[1]
    bias = abs(wider - value) / abs(wider)
    if bias >= FD_BOX_BIAS_RTOL:
        logger.warning(f"Box truncation changes the FD capacity by {bias:.2%}; widen the box")
    return bias


def capacity_fd(
    target: Union[CondenserSpec, ContourSet],
    h: Optional[float] = None,
    tol: float = METHOD_TOLERANCES[Method.FD],
    box_factor: float = FD_BOX_FACTOR,
    max_halvings: int = 4,
    wall: Optional[float] = None,
) -> CapacityResult:
    """
    Finite-difference capacity with Richardson extrapolation 2 c(h/2) - c(h).

    The step keeps halving (at most ``max_halvings`` times) while the extrapolation
    changes the value by more than ``tol`` and the next grid fits the node limit.

    Args:
        target: a spec or a decoded contour set.
        h: initial step (a quarter of the smallest feature by default).
        tol: relative extrapolation change at which to stop.
        box_factor: half-width of the cut-off box for unbounded condensers, in
            multiples of the largest dimension.
        max_halvings: cap on the number of step halvings.
        wall: fixed potential of the box walls; None lets them float.

    Returns:
        CapacityResult whose error estimate is the last extrapolation change. For
        unbounded condensers the diagnostics add the wall potential and the box
        bias estimate.

    Raises:
        SolverError(OOM_GUARD) if even the first two grids do not fit.
    """
    cset = _contour_set(target)
    step = h or default_step(cset)
    grid = build_grid(cset, step, box_factor)
    u, coarse, iterations, potential = _solve(grid, wall)
    history = [(grid.h, coarse)]
    value, err = coarse, math.inf
    while len(history) <= max_halvings:
        grid = build_grid(cset, 0.5 * history[-1][0], box_factor)
        u, fine, iterations, potential = _solve(grid, wall)
        history.append((grid.h, fine))
        value = 2.0 * fine - history[-2][1]
        err = abs(value - fine) / abs(value)
        logger.debug(f"FD h={grid.h:.4g}: {fine:.8g}, extrapolated {value:.8g} (change {err:.2e})")
        if err <= tol:
            break
        _, _, nx, ny = grid_layout(cset, 0.5 * grid.h, box_factor)
        if nx * ny > get_fd_node_limit():
            logger.warning(f"FD extrapolation change {err:.2e} above {tol:.1e} at the finest grid that fits")
            break
    logger.info(f"FD capacity {value:.8g} (h={grid.h:.4g}, {grid.nodes} nodes)")
    diagnostics = {
        "h": grid.h,
        "nodes": grid.nodes,
        "levels": [list(entry) for entry in history],
        "cg_iterations": iterations,
        "max_principle": bool(u.min() >= -1e-12 and u.max() <= 1.0 + 1e-12),
    }
    if potential is not None:
        diagnostics["wall_potential"] = potential
        diagnostics["box_bias"] = box_bias(cset, history[0][0], coarse, box_factor, wall)
    return CapacityResult(value, Method.FD, err, diagnostics)
