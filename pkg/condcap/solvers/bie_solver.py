"""
solvers/bie_solver.py

General capacity solver built on the Green formula for the potential u of a condenser,

    u(z) = sum_j u_j D_j(z) - (1/2 pi) int log|z - zeta| du/dn(zeta) ds,

where D_j is the double layer of the constant 1 over contour j. With u constant on each
contour this is a first-kind (Symm) equation for the Neumann data. Each contour is
parametrized over [0, 2 pi), graded toward its corners, and the density
|Gamma'| du/dn is expanded in trigonometric modes plus singular basis functions
attached to the corners and slot tips. The log|2 sin((t - s)/2)| part of the kernel
(and the same part centered at the coincident point of a two-sided edge) acts on the
modes through its known spectrum; the smooth remainder goes through the rectangle
rule. The singular functions are integrated against the log kernel by product
quadrature. Collocation is at the centers of the mesh steps.

Mesh points are kept as a vertex plus an offset, so distances between points that
crowd the same corner keep their relative precision.

The charges of the two Dirichlet problems (u = 1 on one terminal, 0 on the other) form
a 2x2 capacity matrix. Its entries equal the capacity in modulus, its rows sum to zero
and it is symmetric; the last two are checked, never enforced.

A piecewise-constant panel scheme with exact log-kernel integration over straight
segments serves as a fallback discretization.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, qr, solve_triangular
from scipy.linalg import lstsq as dense_lstsq
from scipy.sparse.linalg import LinearOperator, lsqr
from scipy.special import xlogy
from shapely.geometry import LineString

from ..common.constants import (
    BIE_BASE_STEPS,
    BIE_KRYLOV_MAXITER,
    BIE_KRYLOV_TOL,
    BIE_LEVEL_CAP,
    BIE_MIN_EDGE_STEPS,
    BIE_PROXIMITY_FACTOR,
    BIE_RANK_RTOL,
    GEOMETRY_ATOL,
    METHOD_TOLERANCES,
    get_bie_max_unknowns,
    get_default_threads,
)
from ..common.errors import ErrorCode, SolverError
from ..common.types import (
    CapacityResult,
    Contour,
    ContourKind,
    ContourSet,
    Method,
    SingularKind,
    Terminal,
)
from ..geometry.contours import _key, build_contours, contour_lines
from ..geometry.half_domain import vertex_angle
from ..geometry.spec import CondenserSpec
from ..specfun.quadrature import gauss_legendre

logger = logging.getLogger("condcap.bie")

TERMINALS = (Terminal.OUTER, Terminal.INNER)
SCHEMES = ("auto", "trig", "panel")
ROW_CHUNK = 256
SUPPORT_FRACTION = 0.125
MIN_GRADING = 3.0

# product quadrature over a singular support, in units of the support radius
NEAR_RADIUS = 2.0
PANEL_RATIO = 0.3
NEAR_RULE = (24, 10)
FAR_RULE = (16, 8)
# int_0^1 log(x) (1 - 3x^2 + 2x^3) dx
LOG_MOMENT = -19.0 / 24.0

Target = Union[CondenserSpec, ContourSet]


@dataclass(frozen=True)
class SingularTerm:
    """
    Corner or slot tip of a contour.

    ``angle`` is the interior angle on the condenser side divided by pi; the density
    behaves like r^(1/angle - 1) near the point. ``edges`` are the outgoing and the
    incoming edge of the walk at the point, ``directions`` the unit vectors along them.
    """

    kind: SingularKind
    contour: int
    location: complex
    angle: float
    support: float
    edges: Tuple[int, int] = (-1, -1)
    directions: Tuple[complex, complex] = (0j, 0j)

    @property
    def exponent(self) -> float:
        return 1.0 / self.angle

    def enrichments(self) -> List["Enrichment"]:
        """
        Leading density terms that the trigonometric modes resolve poorly.

        A slot tip carries r^(-1/2) on both faces plus log(1/r) and a constant with
        opposite signs on the two faces. A corner carries r^(k/angle - 1) for k = 1, 2,
        skipping integer powers.

        Example:
            >>> tip = SingularTerm(SingularKind.CUSP_TIP, 0, 0j, 2.0, 0.1)
            >>> [(e.profile, e.exponent, e.signs) for e in tip.enrichments()]
            [('power', -0.5, (1.0, 1.0)), ('log', 0.0, (1.0, -1.0)), ('power', 0.0, (1.0, -1.0))]
        """
        if self.kind is SingularKind.CUSP_TIP:
            return [
                Enrichment(self, "power", -0.5),
                Enrichment(self, "log", 0.0, (1.0, -1.0)),
                Enrichment(self, "power", 0.0, (1.0, -1.0)),
            ]
        out = []
        for k in (1, 2):
            gamma = k * self.exponent - 1.0
            if abs(gamma - round(gamma)) > 1e-9:
                out.append(Enrichment(self, "power", gamma))
        return out


@dataclass(frozen=True)
class Enrichment:
    """
    Singular basis function: a profile in the distance r from a singular point, times
    the cutoff 1 - 3x^2 + 2x^3 with x = r / support, on the two edges at the point.

    ``profile`` is "power" (r^exponent) or "log" (log(1/r)); ``signs`` weight the
    outgoing and the incoming edge.
    """

    term: SingularTerm
    profile: str
    exponent: float = 0.0
    signs: Tuple[float, float] = (1.0, 1.0)

    @property
    def charge(self) -> float:
        """Integral of the function over its support."""
        rho = self.term.support
        if self.profile == "log":
            per_edge = -rho * (math.log(rho) * _moment(0.0) + LOG_MOMENT)
        else:
            per_edge = rho ** (self.exponent + 1.0) * _moment(self.exponent)
        return per_edge * sum(self.signs)

    def values(self, anchor: np.ndarray, offset: np.ndarray, edge: np.ndarray) -> np.ndarray:
        """The function at mesh points given as vertex + offset, lying on walk edges ``edge``."""
        term = self.term
        r = np.abs((anchor - term.location) + offset)
        x = r / term.support
        out = np.zeros(r.size)
        for sign, e in zip(self.signs, term.edges):
            hit = (edge == e) & (x < 1.0) & (r > 0.0)
            rs, xs = r[hit], x[hit]
            profile = -np.log(rs) if self.profile == "log" else rs ** self.exponent
            out[hit] += sign * profile * (1.0 - 3.0 * xs * xs + 2.0 * xs ** 3)
        return out


@dataclass
class ContourMesh:
    index: int
    contour: Contour
    walk: Tuple[complex, ...]
    nodes: np.ndarray
    speed: np.ndarray
    colloc: np.ndarray
    mirror_t: np.ndarray
    colloc_edge: np.ndarray
    mirror_edge: np.ndarray
    node_edge: np.ndarray
    edge_mirror: np.ndarray
    node_anchor: np.ndarray
    node_offset: np.ndarray
    colloc_anchor: np.ndarray
    colloc_offset: np.ndarray

    @property
    def terminal(self) -> Terminal:
        return self.contour.terminal

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def order(self) -> int:
        return (3 * self.size) // 8

    @property
    def width(self) -> int:
        return 2 * self.order - 1

    @property
    def s(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.size) / self.size

    @property
    def t(self) -> np.ndarray:
        return 2.0 * math.pi * (np.arange(self.size) + 0.5) / self.size

    @property
    def basis(self) -> np.ndarray:
        return _trig_basis(self.s, self.order)


@dataclass
class BoundaryDiscretization:
    """
    Meshes of all contours and the column layout of the collocation system: the
    trigonometric block of each contour, then the singular basis functions, then the
    potential offset.
    """

    meshes: List[ContourMesh]
    bounded: bool
    level: int
    singular_terms: List[SingularTerm] = field(default_factory=list)

    @property
    def offsets(self) -> List[int]:
        out, total = [], 0
        for mesh in self.meshes:
            out.append(total)
            total += mesh.width
        return out

    @property
    def row_starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([mesh.size for mesh in self.meshes])[:-1]]).astype(int)

    @property
    def enrichments(self) -> List[Enrichment]:
        return [item for term in self.singular_terms for item in term.enrichments()]

    @property
    def enrichment_offset(self) -> int:
        return sum(mesh.width for mesh in self.meshes)

    def enrichment_columns(self, contour: int) -> np.ndarray:
        start = self.enrichment_offset
        return np.array(
            [start + c for c, item in enumerate(self.enrichments) if item.term.contour == contour], dtype=int
        )

    @property
    def rows(self) -> int:
        return sum(mesh.size for mesh in self.meshes) + 1

    @property
    def unknowns(self) -> int:
        return self.enrichment_offset + len(self.enrichments) + 1


@dataclass
class BlockPreconditioner:
    """
    Right preconditioner x = P y for the trigonometric system.

    On each contour the self-interaction block of the non-constant columns (modes of
    order 1 and up plus the singular basis functions) is factored with column pivoting,
    A_jj Pi = Q R. P applies R^-1 on the numerically independent columns and drops the
    rest, so A P has orthonormal diagonal blocks. Constant modes and the potential
    offset (the coarse columns) are normalized only.
    """

    unknowns: int
    columns: List[np.ndarray]
    factors: List[np.ndarray]
    coarse: np.ndarray
    norms: np.ndarray

    @property
    def size(self) -> int:
        return sum(cols.size for cols in self.columns) + self.coarse.size

    def apply(self, y: np.ndarray) -> np.ndarray:
        x = np.zeros(self.unknowns)
        start = 0
        for cols, r in zip(self.columns, self.factors):
            x[cols] = solve_triangular(r, y[start:start + cols.size])
            start += cols.size
        x[self.coarse] = y[start:] / self.norms
        return x

    def adjoint(self, v: np.ndarray) -> np.ndarray:
        parts = [solve_triangular(r, v[cols], trans="T") for cols, r in zip(self.columns, self.factors)]
        return np.concatenate(parts + [v[self.coarse] / self.norms])

    def operator(self, matrix: np.ndarray) -> LinearOperator:
        return LinearOperator(
            (matrix.shape[0], self.size),
            matvec=lambda y: matrix @ self.apply(np.ravel(y)),
            rmatvec=lambda r: self.adjoint(matrix.T @ np.ravel(r)),
            dtype=float,
        )

    def dense(self, matrix: np.ndarray) -> np.ndarray:
        """A P as an explicit matrix."""
        parts = [solve_triangular(r, matrix[:, cols].T, trans="T").T for cols, r in zip(self.columns, self.factors)]
        return np.hstack(parts + [matrix[:, self.coarse] / self.norms[None, :]])


@dataclass
class BieSystem:
    """
    Collocation matrix, per-contour charge functionals and right-hand side.

    ``blocks`` holds the (rows, columns) of each contour's self-interaction block and
    ``coarse`` the constant-mode and offset columns; panel systems leave both empty.
    """

    matrix: np.ndarray
    charges: np.ndarray
    rhs: Optional[np.ndarray] = None
    scheme: str = "trig"
    blocks: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    coarse: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    preconditioner: Optional[BlockPreconditioner] = None


@dataclass
class DensitySolution:
    coefficients: np.ndarray
    constant: float
    charges: np.ndarray
    residual: float
    iterations: int
    fallback: bool
    scheme: str = "trig"


@dataclass
class CapacityMatrix:
    """m[k][j]: charge on terminal j when u = 1 on terminal k and 0 on the other."""

    entries: np.ndarray
    solutions: Dict[Terminal, DensitySolution]
    discretization: BoundaryDiscretization

    @property
    def capacity(self) -> float:
        return abs(float(self.entries[1, 1]))

    def deviation(self) -> float:
        asymmetry = abs(self.entries[0, 1] - self.entries[1, 0])
        row_sums = np.max(np.abs(self.entries.sum(axis=1)))
        return float(max(asymmetry, row_sums))

    def check(self, tol: float) -> None:
        bound = 100.0 * tol * max(float(np.max(np.abs(self.entries))), 1.0)
        deviation = self.deviation()
        if deviation > bound:
            raise SolverError(
                ErrorCode.CHECK_FAIL,
                f"capacity matrix deviates from symmetry/zero row sums by {deviation:.3e} (bound {bound:.3e})",
                {"entries": self.entries.tolist(), "level": self.discretization.level},
            )


def _contour_set(target: Target) -> ContourSet:
    return target if isinstance(target, ContourSet) else build_contours(target)


def _trig_basis(s: np.ndarray, order: int) -> np.ndarray:
    k = np.arange(1, order)
    phase = np.outer(s, k)
    return np.hstack([np.ones((s.size, 1)), np.cos(phase), np.sin(phase)])


def _symm_spectrum(t: np.ndarray, order: int) -> np.ndarray:
    """(1/2 pi) int log|2 sin((t - s)/2)| phi(s) ds for each trigonometric mode phi."""
    k = np.arange(1, order)
    phase = np.outer(t, k)
    return np.hstack([np.zeros((t.size, 1)), -np.cos(phase) / (2 * k), -np.sin(phase) / (2 * k)])


def _log_chord(t: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.log(np.abs(2.0 * np.sin(0.5 * (t[:, None] - s[None, :]))))


def _separation(anchor: np.ndarray, offset: np.ndarray, other_anchor: np.ndarray, other_offset: np.ndarray) -> np.ndarray:
    """Pairwise z - w for points stored as vertex + offset; shared vertices cancel exactly."""
    return (anchor[:, None] - other_anchor[None, :]) + (offset[:, None] - other_offset[None, :])


def _grading(xi: np.ndarray, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sigmoid map of [0, 1] onto itself, flat of order a at 0 and of order b at 1."""
    f = xi ** a
    g = (1.0 - xi) ** b
    value = f / (f + g)
    slope = (a * xi ** (a - 1.0) * (1.0 - xi) ** b + b * f * (1.0 - xi) ** (b - 1.0)) / (f + g) ** 2
    return value, slope


def _edge_points(
    a: complex, b: complex, xi: np.ndarray, pa: float, pb: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Graded points of the edge a -> b as (nearer end, offset from it) and the map's slope."""
    value, slope = _grading(xi, pa, pb)
    rest, _ = _grading(1.0 - xi, pb, pa)
    near_a = value <= 0.5
    anchor = np.where(near_a, a, b).astype(complex)
    offset = np.where(near_a, (b - a) * value, (a - b) * rest)
    return anchor, offset, slope


def _moment(gamma: float) -> float:
    """int_0^1 x^gamma (1 - 3x^2 + 2x^3) dx."""
    return 1.0 / (gamma + 1.0) - 3.0 / (gamma + 3.0) + 2.0 / (gamma + 4.0)


@lru_cache(maxsize=8)
def _graded_rule(levels: int, order: int, both_ends: bool) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels on [0, 1] refined geometrically toward 0, and toward 1 with ``both_ends``."""
    cuts = PANEL_RATIO ** np.arange(levels, 0, -1)
    if both_ends:
        half = 0.5 * cuts
        breaks = np.concatenate([[0.0], half, [0.5], 1.0 - half[::-1], [1.0]])
    else:
        breaks = np.concatenate([[0.0], cuts, [1.0]])
    s, w = gauss_legendre(order)
    lo, width = breaks[:-1, None], np.diff(breaks)[:, None]
    nodes = (lo + 0.5 * width * (1.0 + s[None, :])).ravel()
    weights = (0.5 * width * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _support_integrand(w: np.ndarray, u: np.ndarray, profile: str, gamma: float, q: float) -> np.ndarray:
    x = u ** q
    with np.errstate(divide="ignore"):
        kernel = np.log(np.abs(w - x))
    if profile == "log":
        weight = np.log(x)
    elif q != 1.0:
        # x = u^q turns x^gamma dx into q du
        weight = q
    else:
        weight = x ** gamma
    return weight * (1.0 - 3.0 * x * x + 2.0 * x ** 3) * kernel


def support_integrals(w: np.ndarray, profile: str = "power", gamma: float = 0.0) -> np.ndarray:
    """
    int_0^1 f(x) (1 - 3x^2 + 2x^3) log|w - x| dx with f = x^gamma ("power") or log x ("log").

    Negative powers are removed by the substitution x = u^(1/(gamma + 1)). Points
    within ``NEAR_RADIUS`` of the origin split the interval at the projection of w and
    use panels graded toward both pieces' ends; farther points use panels graded
    toward 0 only.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    q = 1.0 / (gamma + 1.0) if profile == "power" and gamma < 0.0 else 1.0
    out = np.empty(w.size)
    near = np.abs(w) <= NEAR_RADIUS
    if (~near).any():
        u, weights = _graded_rule(*FAR_RULE, False)
        out[~near] = _support_integrand(w[~near, None], u[None, :], profile, gamma, q) @ weights
    if near.any():
        u, weights = _graded_rule(*NEAR_RULE, True)
        wn = w[near]
        split = np.clip(wn.real, 0.0, 1.0) ** (1.0 / q)
        total = np.zeros(wn.size)
        # empty pieces are skipped: their end nodes sit on the singular end
        lo, hi = split > 0.0, split < 1.0
        if lo.any():
            s = split[lo, None]
            total[lo] += split[lo] * (_support_integrand(wn[lo, None], s * u[None, :], profile, gamma, q) @ weights)
        if hi.any():
            s = split[hi, None]
            rest = s + (1.0 - s) * u[None, :]
            total[hi] += (1.0 - split[hi]) * (_support_integrand(wn[hi, None], rest, profile, gamma, q) @ weights)
        out[near] = total
    return out


def _enrichment_columns(enrichments: Sequence[Enrichment], anchor: np.ndarray, offset: np.ndarray) -> np.ndarray:
    """(1/2 pi) int log|z - zeta| f(zeta) ds for each singular basis function f, at points vertex + offset."""
    block = np.zeros((anchor.size, len(enrichments)))
    for c, item in enumerate(enrichments):
        term = item.term
        rho = term.support
        log_rho = math.log(rho)
        rel = (anchor - term.location) + offset
        for sign, direction in zip(item.signs, term.directions):
            w = rel * np.conj(direction) / rho
            if item.profile == "log":
                plain = log_rho * _moment(0.0) + support_integrals(w, "power", 0.0)
                value = -rho * (log_rho * plain + log_rho * LOG_MOMENT + support_integrals(w, "log"))
            else:
                gamma = item.exponent
                value = rho ** (gamma + 1.0) * (log_rho * _moment(gamma) + support_integrals(w, "power", gamma))
            block[:, c] += sign * value
    return block / (2.0 * math.pi)


def _refine_walk(vertices: Sequence[complex]) -> List[complex]:
    """Split every edge at the walk vertices lying inside it, so overlapping sides share nodes."""
    distinct: Dict[Tuple[float, float], complex] = {}
    for z in vertices:
        distinct.setdefault(_key(z), z)
    out: List[complex] = []
    n = len(vertices)
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        d = b - a
        inner = []
        for z in distinct.values():
            w = (z - a) * d.conjugate() / abs(d) ** 2
            if GEOMETRY_ATOL < w.real < 1.0 - GEOMETRY_ATOL and abs(w.imag) * abs(d) <= GEOMETRY_ATOL:
                inner.append((w.real, z))
        out.append(a)
        out.extend(z for _, z in sorted(inner, key=lambda item: item[0]))
    return out


def _walk_angles(walk: Sequence[complex]) -> List[float]:
    n = len(walk)
    return [vertex_angle(walk[i] - walk[i - 1], walk[(i + 1) % n] - walk[i]) for i in range(n)]


def singular_terms(contour: Contour, index: int, level: int = 0) -> List[SingularTerm]:
    """
    Corners (interior angle other than pi) and slot tips of a polygonal contour.

    Edge indices refer to the refined walk the mesh is built on. The support radius
    is 1/8 of the shorter adjacent edge, halved per level.

    Example:
        >>> slot = Contour(ContourKind.SLOT, Terminal.INNER, (-1j, 1j), orientation=-1)
        >>> [term.kind.value for term in singular_terms(slot, 0)]
        ['CUSP_TIP', 'CUSP_TIP']
    """
    if contour.kind is ContourKind.CIRCLE:
        return []
    walk = _refine_walk(contour.vertices)
    n = len(walk)
    terms = []
    for i, angle in enumerate(_walk_angles(walk)):
        if abs(angle - 1.0) <= 1e-12:
            continue
        ahead, back = walk[(i + 1) % n] - walk[i], walk[i - 1] - walk[i]
        shorter = min(abs(ahead), abs(back))
        kind = SingularKind.CUSP_TIP if angle == 2.0 else SingularKind.CORNER
        terms.append(
            SingularTerm(
                kind,
                index,
                walk[i],
                angle,
                SUPPORT_FRACTION * shorter * 0.5 ** level,
                edges=(i, (i - 1) % n),
                directions=(ahead / abs(ahead), back / abs(back)),
            )
        )
    return terms


def check_supports(terms: Sequence[SingularTerm]) -> None:
    for first, second in combinations(terms, 2):
        if _key(first.location) == _key(second.location):
            continue
        if abs(first.location - second.location) < first.support + second.support:
            raise SolverError(
                ErrorCode.SINGULAR_OVERLAP,
                f"singular supports at {first.location} and {second.location} intersect",
                {"first": str(first.location), "second": str(second.location)},
            )


def _edge_steps(cset: ContourSet, index: int, edges: List[Tuple[complex, complex]], level: int) -> List[int]:
    lengths = [abs(b - a) for a, b in edges]
    perimeter = sum(lengths)
    lines = [LineString([(a.real, a.imag), (b.real, b.imag)]) for a, b in edges]
    others = [contour_lines(c) for j, c in enumerate(cset.contours) if j != index]
    keys = {(_key(a), _key(b)): e for e, (a, b) in enumerate(edges)}

    steps = []
    for e, line in enumerate(lines):
        candidates = [lines[f] for f in range(len(lines)) if lines[f].disjoint(line)] + others
        gap = min((line.distance(g) for g in candidates), default=math.inf)
        count = max(BIE_MIN_EDGE_STEPS, round(BIE_BASE_STEPS * lengths[e] / perimeter))
        if math.isfinite(gap) and gap > 0:
            count = max(count, math.ceil(BIE_PROXIMITY_FACTOR * lengths[e] / gap))
        steps.append(count * 2 ** level)

    unpaired = []
    for e, (a, b) in enumerate(edges):
        partner = keys.get((_key(b), _key(a)))
        if partner is None:
            unpaired.append(e)
        else:
            steps[e] = steps[partner] = max(steps[e], steps[partner])
    if sum(steps) % 2 and unpaired:
        steps[max(unpaired, key=lambda e: lengths[e])] += 1
    return steps


def _circle_mesh(cset: ContourSet, index: int, level: int) -> ContourMesh:
    contour = cset.contours[index]
    m = BIE_BASE_STEPS * 2 ** level
    s = 2.0 * math.pi * np.arange(m) / m
    t = s + math.pi / m
    orient = contour.orientation
    empty = np.full(m, -1)
    nodes = contour.center + contour.radius * np.exp(1j * orient * s)
    colloc = contour.center + contour.radius * np.exp(1j * orient * t)
    return ContourMesh(
        index=index,
        contour=contour,
        walk=(),
        nodes=nodes,
        speed=np.full(m, contour.radius),
        colloc=colloc,
        mirror_t=np.full(m, np.nan),
        colloc_edge=empty,
        mirror_edge=empty.copy(),
        node_edge=empty.copy(),
        edge_mirror=np.zeros(0, dtype=int),
        node_anchor=nodes,
        node_offset=np.zeros(m, dtype=complex),
        colloc_anchor=colloc,
        colloc_offset=np.zeros(m, dtype=complex),
    )


def _polygon_mesh(cset: ContourSet, index: int, level: int) -> ContourMesh:
    contour = cset.contours[index]
    walk = _refine_walk(contour.vertices)
    n = len(walk)
    edges = [(walk[i], walk[(i + 1) % n]) for i in range(n)]

    grading: Dict[Tuple[float, float], float] = {}
    for z, angle in zip(walk, _walk_angles(walk)):
        key = _key(z)
        grading[key] = max(grading.get(key, MIN_GRADING), MIN_GRADING * angle)

    steps = _edge_steps(cset, index, edges, level)
    m = sum(steps)
    h = 2.0 * math.pi / m
    starts = np.concatenate([[0], np.cumsum(steps)[:-1]]).astype(int)
    keys = {(_key(a), _key(b)): e for e, (a, b) in enumerate(edges)}
    edge_mirror = np.array([keys.get((_key(b), _key(a)), -1) for a, b in edges], dtype=int)

    parts: Dict[str, list] = {
        name: [] for name in ("node_anchor", "node_offset", "speed", "colloc_anchor", "colloc_offset", "mirror_t")
    }
    edge_of, partner_of = [], []
    for e, ((a, b), count) in enumerate(zip(edges, steps)):
        pa, pb = grading[_key(a)], grading[_key(b)]
        xi = np.arange(count) / count
        anchor, offset, slope = _edge_points(a, b, xi, pa, pb)
        parts["node_anchor"].append(anchor)
        parts["node_offset"].append(offset)
        parts["speed"].append(abs(b - a) * slope / (count * h))
        anchor, offset, _ = _edge_points(a, b, xi + 0.5 / count, pa, pb)
        parts["colloc_anchor"].append(anchor)
        parts["colloc_offset"].append(offset)
        partner = edge_mirror[e]
        if partner >= 0:
            mirrored = starts[partner] + count - 1 - np.arange(count)
            parts["mirror_t"].append((mirrored + 0.5) * h)
        else:
            parts["mirror_t"].append(np.full(count, np.nan))
        edge_of.append(np.full(count, e))
        partner_of.append(np.full(count, partner))

    arrays = {name: np.concatenate(values) for name, values in parts.items()}
    edge_of = np.concatenate(edge_of).astype(int)
    return ContourMesh(
        index=index,
        contour=contour,
        walk=tuple(walk),
        nodes=arrays["node_anchor"] + arrays["node_offset"],
        speed=arrays["speed"],
        colloc=arrays["colloc_anchor"] + arrays["colloc_offset"],
        mirror_t=arrays["mirror_t"],
        colloc_edge=edge_of,
        mirror_edge=np.concatenate(partner_of).astype(int),
        node_edge=edge_of.copy(),
        edge_mirror=edge_mirror,
        node_anchor=arrays["node_anchor"],
        node_offset=arrays["node_offset"],
        colloc_anchor=arrays["colloc_anchor"],
        colloc_offset=arrays["colloc_offset"],
    )


def discretize(cset: ContourSet, level: int = 0) -> BoundaryDiscretization:
    """
    Parametrize and mesh every contour of a condenser.

    Polygon edges get a number of steps proportional to their share of the perimeter,
    raised near other boundary parts and doubled per level; the two sides of a slot or
    slit get equal counts so their collocation points coincide.

    Args:
        cset: the contour set.
        level: refinement level, 0 or more.

    Returns:
        BoundaryDiscretization with one mesh per contour and the singular terms.

    Example:
        >>> circle = Contour(ContourKind.CIRCLE, Terminal.OUTER, center=0j, radius=1.0)
        >>> mesh = discretize(ContourSet((circle,), True)).meshes[0]
        >>> mesh.size, mesh.order
        (64, 24)
    """
    if level < 0:
        raise ValueError(f"level must be non-negative, got {level}")
    meshes, terms = [], []
    for index, contour in enumerate(cset.contours):
        if contour.kind is ContourKind.CIRCLE:
            meshes.append(_circle_mesh(cset, index, level))
        else:
            meshes.append(_polygon_mesh(cset, index, level))
        terms.extend(singular_terms(contour, index, level))
    disc = BoundaryDiscretization(meshes, cset.bounded, level, terms)
    logger.debug(
        f"Level {level}: {len(meshes)} contours, {disc.rows - 1} collocation points, "
        f"{disc.unknowns} unknowns, {len(terms)} singular points, {len(disc.enrichments)} singular columns"
    )
    return disc


def double_layer_constant(
    points: Union[complex, Sequence[complex], np.ndarray],
    vertices: Sequence[complex],
    own: Optional[np.ndarray] = None,
    mirror: Optional[np.ndarray] = None,
    offset: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Angle subtended by a closed polygon over 2 pi, i.e. the double layer of the constant 1.

    For boundary points pass the index of the edge they lie on as ``own`` (and of the
    reverse edge on two-sided parts as ``mirror``, -1 for none); those edges are left
    out, which gives the principal value. With ``offset`` the points are
    ``points + offset``, with ``points`` on polygon vertices.

    Example:
        >>> square = [0j, 1 + 0j, 1 + 1j, 1j]
        >>> [round(float(v), 12) for v in double_layer_constant([0.5 + 0.5j, 2 + 2j], square)]
        [1.0, 0.0]
    """
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    shift = np.zeros(z.size, dtype=complex) if offset is None else np.asarray(offset, dtype=complex)
    a = np.asarray(vertices, dtype=complex)
    b = np.roll(a, -1)
    to_a = (a[None, :] - z[:, None]) - shift[:, None]
    to_b = (b[None, :] - z[:, None]) - shift[:, None]
    angles = np.angle(to_b * np.conj(to_a))
    rows = np.arange(z.size)
    for skip in (own, mirror):
        if skip is None:
            continue
        skip = np.asarray(skip, dtype=int)
        hit = skip >= 0
        angles[rows[hit], skip[hit]] = 0.0
    return angles.sum(axis=1) / (2.0 * math.pi)


def _double_layer_limit(
    mesh: ContourMesh,
    z: np.ndarray,
    own: Optional[np.ndarray] = None,
    mirror: Optional[np.ndarray] = None,
    offset: Optional[np.ndarray] = None,
) -> np.ndarray:
    """D of a contour at points of the condenser or, with ``own`` given, on that contour from the condenser side."""
    contour = mesh.contour
    if contour.kind is ContourKind.CIRCLE:
        if own is not None:
            return np.full(z.size, 1.0 if contour.orientation > 0 else 0.0)
        inside = np.abs(z - contour.center) < contour.radius
        return contour.orientation * inside.astype(float)
    if own is None:
        return double_layer_constant(z, mesh.walk, offset=offset)
    value = double_layer_constant(z, mesh.walk, own, mirror, offset)
    return value + 0.5 * (np.asarray(own) >= 0) - 0.5 * (np.asarray(mirror) >= 0)


def _boundary_values(
    disc: BoundaryDiscretization,
    index: int,
    anchor: np.ndarray,
    offset: np.ndarray,
    own: np.ndarray,
    mirror: np.ndarray,
    values: Sequence[float],
) -> np.ndarray:
    total = np.full(anchor.size, -values[index])
    for j, mesh in enumerate(disc.meshes):
        if values[j] == 0.0:
            continue
        if j == index:
            total += values[j] * _double_layer_limit(mesh, anchor, own, mirror, offset)
        else:
            total += values[j] * _double_layer_limit(mesh, anchor + offset)
    return total


def dirichlet_rhs(disc: BoundaryDiscretization, dirichlet: Dict[Terminal, float]) -> np.ndarray:
    """Right-hand side sum_j u_j D_j - u_i at the collocation points, plus the zero-charge row."""
    values = [float(dirichlet.get(mesh.terminal, 0.0)) for mesh in disc.meshes]
    parts = [
        _boundary_values(
            disc, i, mesh.colloc_anchor, mesh.colloc_offset, mesh.colloc_edge, mesh.mirror_edge, values
        )
        for i, mesh in enumerate(disc.meshes)
    ]
    return np.concatenate(parts + [np.zeros(1)])


def _row_chunks(disc: BoundaryDiscretization) -> List[Tuple[int, np.ndarray]]:
    return [
        (i, np.arange(start, min(start + ROW_CHUNK, mesh.size)))
        for i, mesh in enumerate(disc.meshes)
        for start in range(0, mesh.size, ROW_CHUNK)
    ]


def _trig_rows(disc: BoundaryDiscretization, bases: List[np.ndarray], index: int, rows: np.ndarray) -> np.ndarray:
    mesh = disc.meshes[index]
    anchor, offset = mesh.colloc_anchor[rows], mesh.colloc_offset[rows]
    t = mesh.t[rows]
    tm = mesh.mirror_t[rows]
    paired = np.isfinite(tm)
    block = np.zeros((rows.size, disc.unknowns))
    for j, (other, start) in enumerate(zip(disc.meshes, disc.offsets)):
        with np.errstate(divide="ignore"):
            kernel = np.log(np.abs(_separation(anchor, offset, other.node_anchor, other.node_offset)))
        if j == index:
            kernel -= _log_chord(t, other.s)
            if paired.any():
                kernel[paired] -= _log_chord(tm[paired], other.s)
        part = kernel @ bases[j] / other.size
        if j == index:
            part += _symm_spectrum(t, other.order)
            if paired.any():
                part[paired] += _symm_spectrum(tm[paired], other.order)
        block[:, start:start + other.width] = part
    enrichments = disc.enrichments
    if enrichments:
        block[:, disc.enrichment_offset:-1] = _enrichment_columns(enrichments, anchor, offset)
    block[:, -1] = 1.0
    return block


def _fill(disc: BoundaryDiscretization, rows_of, matrix: np.ndarray, workers: Optional[int]) -> None:
    chunks = _row_chunks(disc)
    starts = disc.row_starts
    with ThreadPoolExecutor(max_workers=workers or get_default_threads()) as pool:
        blocks = pool.map(lambda chunk: rows_of(chunk[0], chunk[1]), chunks)
        for (i, rows), block in zip(chunks, blocks):
            matrix[starts[i] + rows] = block


def _require_finite(matrix: np.ndarray, disc: BoundaryDiscretization, scheme: str) -> None:
    if not np.isfinite(matrix).all():
        bad = int(np.count_nonzero(~np.isfinite(matrix)))
        raise SolverError(
            ErrorCode.DEGENERATE,
            f"{scheme} collocation matrix has {bad} non-finite entries at level {disc.level}",
            {"level": disc.level, "scheme": scheme},
        )


def assemble(
    disc: BoundaryDiscretization,
    dirichlet: Optional[Dict[Terminal, float]] = None,
    workers: Optional[int] = None,
) -> BieSystem:
    """
    Collocation system of the trigonometric scheme.

    Unknowns are the mode coefficients of every contour, the coefficients of the
    singular basis functions, and one constant (the potential offset, minus the value
    at infinity for unbounded condensers). Each singular column has the charge of its
    function taken out through the contour's constant mode, so only constant modes
    carry charge. The last row asks for zero total charge. Rows are filled in parallel
    chunks; every entry is computed independently of the chunking.

    Raises:
        SolverError(SINGULAR_OVERLAP) if two corner supports intersect.
        SolverError(DEGENERATE) if an entry comes out non-finite.
    """
    check_supports(disc.singular_terms)
    bases = [mesh.basis for mesh in disc.meshes]
    matrix = np.zeros((disc.rows, disc.unknowns))
    _fill(disc, lambda i, rows: _trig_rows(disc, bases, i, rows), matrix, workers)

    offsets = disc.offsets
    for c, item in enumerate(disc.enrichments):
        column = disc.enrichment_offset + c
        matrix[:-1, column] -= item.charge / (2.0 * math.pi) * matrix[:-1, offsets[item.term.contour]]
    _require_finite(matrix, disc, "trig")

    charges = np.zeros((len(disc.meshes), disc.unknowns))
    blocks = []
    for j, (mesh, offset, start) in enumerate(zip(disc.meshes, offsets, disc.row_starts)):
        charges[j, offset] = 2.0 * math.pi
        columns = np.concatenate([np.arange(offset + 1, offset + mesh.width), disc.enrichment_columns(j)])
        blocks.append((np.arange(start, start + mesh.size), columns.astype(int)))
    matrix[-1, :] = charges.sum(axis=0)
    coarse = np.array(offsets + [disc.unknowns - 1], dtype=int)
    rhs = dirichlet_rhs(disc, dirichlet) if dirichlet is not None else None
    return BieSystem(matrix, charges, rhs, "trig", blocks, coarse)


def block_preconditioner(system: BieSystem) -> BlockPreconditioner:
    """
    Factor the self-interaction blocks of a trigonometric system.

    Columns whose pivoted R diagonal falls below ``BIE_RANK_RTOL`` times the leading
    one are numerically dependent on the others and left out.
    """
    columns, factors = [], []
    for rows, cols in system.blocks:
        if cols.size == 0:
            continue
        try:
            _, r, pivots = qr(system.matrix[np.ix_(rows, cols)], mode="economic", pivoting=True)
        except (LinAlgError, ValueError) as exc:
            raise SolverError(ErrorCode.DEGENERATE, f"block factorization failed: {exc}") from exc
        diagonal = np.abs(np.diag(r))
        rank = int(np.count_nonzero(diagonal > BIE_RANK_RTOL * diagonal[0])) if diagonal[0] > 0 else 0
        if rank < cols.size:
            logger.debug(f"Block of {cols.size} columns has numerical rank {rank}")
        columns.append(cols[pivots[:rank]])
        factors.append(r[:rank, :rank])
    norms = np.linalg.norm(system.matrix[:, system.coarse], axis=0)
    return BlockPreconditioner(system.matrix.shape[1], columns, factors, system.coarse, np.where(norms > 0, norms, 1.0))


def _log_segment(u: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Antiderivative of log sqrt(u^2 + y^2) in u."""
    return 0.5 * xlogy(u, u * u + y * y) - u + y * np.arctan2(u, y)


def _panel_geometry(disc: BoundaryDiscretization):
    starts = np.concatenate([mesh.nodes for mesh in disc.meshes])
    ends = np.concatenate([np.roll(mesh.nodes, -1) for mesh in disc.meshes])
    lengths = np.abs(ends - starts)
    return starts, ends, lengths


def _panel_rows(disc: BoundaryDiscretization, geometry, index: int, rows: np.ndarray) -> np.ndarray:
    starts, ends, lengths = geometry
    mesh = disc.meshes[index]
    begin, end = mesh.nodes[rows], np.roll(mesh.nodes, -1)[rows]
    mids = 0.5 * (begin + end)
    direction = (ends - starts) / np.where(lengths > 0, lengths, 1.0)
    rel = (mids[:, None] - starts[None, :]) * np.conj(direction)[None, :]
    a, y = rel.real, np.abs(rel.imag)
    block = np.zeros((rows.size, lengths.size + 1))
    block[:, :-1] = (_log_segment(lengths[None, :] - a, y) - _log_segment(-a, y)) / (2.0 * math.pi)
    block[:, -1] = 1.0
    return block


def assemble_panels(
    disc: BoundaryDiscretization,
    dirichlet: Optional[Dict[Terminal, float]] = None,
    workers: Optional[int] = None,
) -> BieSystem:
    """Piecewise-constant density on the chords between mesh nodes, with exact kernel integrals."""
    check_supports(disc.singular_terms)
    geometry = _panel_geometry(disc)
    lengths = geometry[2]
    size = lengths.size + 1
    matrix = np.zeros((size, size))
    _fill(disc, lambda i, rows: _panel_rows(disc, geometry, i, rows), matrix, workers)
    _require_finite(matrix, disc, "panel")

    charges = np.zeros((len(disc.meshes), size))
    offset = 0
    for j, mesh in enumerate(disc.meshes):
        charges[j, offset:offset + mesh.size] = lengths[offset:offset + mesh.size]
        offset += mesh.size
    matrix[-1, :] = charges.sum(axis=0)
    rhs = panel_rhs(disc, dirichlet) if dirichlet is not None else None
    return BieSystem(matrix, charges, rhs, "panel")


def panel_rhs(disc: BoundaryDiscretization, dirichlet: Dict[Terminal, float]) -> np.ndarray:
    values = [float(dirichlet.get(mesh.terminal, 0.0)) for mesh in disc.meshes]
    parts = []
    for i, mesh in enumerate(disc.meshes):
        mids = 0.5 * (mesh.nodes + np.roll(mesh.nodes, -1))
        own = mesh.node_edge
        mirror = np.where(own >= 0, mesh.edge_mirror[np.maximum(own, 0)] if mesh.edge_mirror.size else -1, -1)
        parts.append(_boundary_values(disc, i, mids, np.zeros(mids.size, dtype=complex), own, mirror, values))
    return np.concatenate(parts + [np.zeros(1)])


def with_rhs(system: BieSystem, disc: BoundaryDiscretization, dirichlet: Dict[Terminal, float]) -> BieSystem:
    rhs = panel_rhs(disc, dirichlet) if system.scheme == "panel" else dirichlet_rhs(disc, dirichlet)
    return replace(system, rhs=rhs)


def _dense_solution(system: BieSystem) -> np.ndarray:
    try:
        return dense_lstsq(system.matrix, system.rhs)[0]
    except (LinAlgError, ValueError) as exc:
        raise SolverError(
            ErrorCode.DEGENERATE,
            f"dense least squares failed on the {system.scheme} system: {exc}",
            {"scheme": system.scheme, "shape": list(system.matrix.shape)},
        ) from exc


def solve_density(system: BieSystem, strict: bool = False) -> DensitySolution:
    """
    Least-squares solution of a collocation system.

    The trigonometric system is solved by LSQR on A P, with P the block preconditioner
    (built here unless the system already carries one). When LSQR reaches its
    iteration cap the dense least-squares solution is used instead (or, with
    ``strict``, an error is raised). Panel systems go straight to the dense solver.

    Raises:
        SolverError(ITERATION_LIMIT) in strict mode when LSQR does not converge.
        SolverError(DEGENERATE) when a linear-algebra routine fails.
    """
    if system.rhs is None:
        raise ValueError("system has no right-hand side")
    iterations, fallback = 0, False
    if system.scheme == "panel":
        x = _dense_solution(system)
    else:
        pre = system.preconditioner or block_preconditioner(system)
        try:
            y, istop, iterations, r1norm = lsqr(
                pre.operator(system.matrix),
                system.rhs,
                atol=BIE_KRYLOV_TOL,
                btol=BIE_KRYLOV_TOL,
                iter_lim=BIE_KRYLOV_MAXITER,
            )[:4]
        except (LinAlgError, ValueError) as exc:
            raise SolverError(ErrorCode.DEGENERATE, f"LSQR failed: {exc}", {"scheme": system.scheme}) from exc
        if istop == 7:
            if strict:
                raise SolverError(
                    ErrorCode.ITERATION_LIMIT,
                    f"LSQR stopped after {iterations} iterations with residual {r1norm:.3e}",
                    {"iterations": int(iterations), "residual": float(r1norm)},
                )
            logger.debug(f"LSQR hit {iterations} iterations (residual {r1norm:.3e})")
            x = _dense_solution(system)
            fallback = True
        else:
            x = pre.apply(y)
    residual = float(np.linalg.norm(system.matrix @ x - system.rhs))
    logger.debug(f"Density solve ({system.scheme}): {iterations} iterations, residual {residual:.3e}")
    return DensitySolution(
        coefficients=x[:-1],
        constant=float(x[-1]),
        charges=system.charges @ x,
        residual=residual,
        iterations=int(iterations),
        fallback=fallback,
        scheme=system.scheme,
    )


def normal_condition(system: BieSystem, preconditioned: bool = False) -> float:
    """
    Condition number of the normal equations, cond(A^T A) = cond(A)^2.

    With ``preconditioned`` the matrix is A P for the block preconditioner.
    """
    matrix = system.matrix
    if preconditioned:
        matrix = (system.preconditioner or block_preconditioner(system)).dense(matrix)
    return float(np.linalg.cond(matrix)) ** 2


def _terminal_charges(disc: BoundaryDiscretization, solution: DensitySolution) -> List[float]:
    return [
        float(sum(q for q, mesh in zip(solution.charges, disc.meshes) if mesh.terminal is terminal))
        for terminal in TERMINALS
    ]


def _matrix_at(
    disc: BoundaryDiscretization, scheme: str, strict: bool, workers: Optional[int]
) -> CapacityMatrix:
    build = assemble_panels if scheme == "panel" else assemble
    system = build(disc, workers=workers)
    if scheme != "panel":
        system.preconditioner = block_preconditioner(system)
    solutions, rows = {}, []
    for k in TERMINALS:
        dirichlet = {t: (1.0 if t is k else 0.0) for t in TERMINALS}
        solution = solve_density(with_rhs(system, disc, dirichlet), strict)
        solutions[k] = solution
        rows.append(_terminal_charges(disc, solution))
    if any(s.fallback for s in solutions.values()):
        logger.warning(
            f"LSQR hit {BIE_KRYLOV_MAXITER} iterations at level {disc.level} "
            f"({disc.unknowns} unknowns); using dense least squares"
        )
    return CapacityMatrix(np.array(rows), solutions, disc)


def capacity_matrix(
    target: Target,
    level: int = 0,
    scheme: str = "trig",
    strict: bool = False,
    check_tol: Optional[float] = None,
    workers: Optional[int] = None,
) -> CapacityMatrix:
    """
    Solve the two Dirichlet problems and collect the terminal charges.

    Args:
        target: a spec or an already decoded contour set.
        level: refinement level.
        scheme: "trig" or "panel".
        strict: raise instead of falling back when LSQR does not converge.
        check_tol: when given, symmetry and zero row sums are checked against 100 x check_tol.
        workers: assembly threads (CONDCAP_THREADS by default).

    Raises:
        SolverError(CHECK_FAIL) when the checks fail.
    """
    if scheme not in ("trig", "panel"):
        raise ValueError(f"unknown scheme {scheme!r}")
    matrix = _matrix_at(discretize(_contour_set(target), level), scheme, strict, workers)
    if check_tol is not None:
        matrix.check(check_tol)
    return matrix


def density_dump(solution: DensitySolution, disc: BoundaryDiscretization) -> List[Tuple[int, float, float]]:
    """(contour, t, du/dn) rows at the mesh nodes (trig) or panel midpoints (panel)."""
    out: List[Tuple[int, float, float]] = []
    if solution.scheme == "panel":
        offset = 0
        for j, mesh in enumerate(disc.meshes):
            values = solution.coefficients[offset:offset + mesh.size]
            out.extend((j, float(t), float(v)) for t, v in zip(mesh.t, values))
            offset += mesh.size
        return out
    singular = solution.coefficients[disc.enrichment_offset:]
    for j, (mesh, offset) in enumerate(zip(disc.meshes, disc.offsets)):
        mu = mesh.basis @ solution.coefficients[offset:offset + mesh.width]
        for item, coefficient in zip(disc.enrichments, singular):
            if item.term.contour != j or coefficient == 0.0:
                continue
            values = item.values(mesh.node_anchor, mesh.node_offset, mesh.node_edge)
            mu += coefficient * (values * mesh.speed - item.charge / (2.0 * math.pi))
        out.extend(
            (j, float(t), float(m / v)) for t, m, v in zip(mesh.s, mu, mesh.speed) if v > GEOMETRY_ATOL
        )
    return out


class LevelSweep:
    """Refine one scheme level by level until two successive capacities agree."""

    logger = logging.getLogger("condcap.bie.sweep")

    def __init__(
        self,
        cset: ContourSet,
        scheme: str,
        tol: float,
        start: int,
        strict: bool,
        workers: Optional[int],
        max_unknowns: Optional[int] = None,
    ):
        self.cset = cset
        self.scheme = scheme
        self.tol = tol
        self.start = start
        self.strict = strict
        self.workers = workers
        self.max_unknowns = max_unknowns or get_bie_max_unknowns()
        self.history: List[Tuple[int, int, float]] = []
        self.matrix: Optional[CapacityMatrix] = None
        self.error = math.inf
        self.converged = False

    def run(self) -> "LevelSweep":
        for level in range(self.start, max(self.start, BIE_LEVEL_CAP) + 1):
            disc = discretize(self.cset, level)
            unknowns = disc.unknowns if self.scheme == "trig" else disc.rows
            if unknowns > self.max_unknowns and self.history:
                self.logger.info(f"{self.scheme}: level {level} needs {unknowns} unknowns, stopping")
                break
            try:
                matrix = _matrix_at(disc, self.scheme, self.strict, self.workers)
            except SolverError as exc:
                if exc.code is not ErrorCode.SINGULAR_OVERLAP:
                    raise
                self.logger.info(f"{self.scheme}: {exc.message} at level {level}, refining")
                continue
            value = matrix.capacity
            if self.history:
                previous = self.history[-1][2]
                self.error = abs(value - previous) / value
            self.history.append((level, unknowns, value))
            self.matrix = matrix
            self.logger.debug(f"{self.scheme} level {level}: capacity {value:.12g}, change {self.error:.2e}")
            if self.error <= self.tol:
                self.converged = True
                break
        return self

    @property
    def value(self) -> float:
        return self.history[-1][2]


def capacity_bie(
    target: Target,
    tol: float = METHOD_TOLERANCES[Method.BIE],
    level: int = 0,
    scheme: str = "auto",
    strict: bool = False,
    keep_density: bool = False,
    workers: Optional[int] = None,
    max_unknowns: Optional[int] = None,
) -> CapacityResult:
    """
    Capacity by the boundary integral method with level refinement.

    Args:
        target: a spec or a decoded contour set.
        tol: relative difference between two successive levels that ends the sweep.
        level: first level.
        scheme: "trig", "panel", or "auto" (trig, then panels if trig does not settle).
        strict: raise on iteration limits and on an unconverged sweep.
        keep_density: put the density of the inner-terminal problem in the diagnostics.
        workers: assembly threads.
        max_unknowns: largest system a sweep may assemble beyond its first level
            (CONDCAP_BIE_MAX_UNKNOWNS by default).

    Returns:
        CapacityResult with the last level's capacity and the last inter-level
        difference as error estimate.

    Example:
        >>> from condcap.geometry import parse_spec
        >>> spec = parse_spec({"family": "A", "x": [0, 1, 3, 4, 5, 6, 9, 11], "l": [2]})
        >>> abs(capacity_bie(spec).value / 9.72079120617096926 - 1) < 5e-4
        True
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    cset = _contour_set(target)
    order = ("trig", "panel") if scheme == "auto" else (scheme,)
    best: Optional[LevelSweep] = None
    fallback = False
    for name in order:
        sweep = LevelSweep(cset, name, tol, level, strict, workers, max_unknowns).run()
        if sweep.history and (best is None or not best.history or sweep.error < best.error):
            best = sweep
        if sweep.converged:
            break
        if name == "trig" and scheme == "auto":
            logger.warning(f"Trigonometric scheme did not settle (change {sweep.error:.2e}); trying panels")
            fallback = True
    if best is None or best.matrix is None:
        raise SolverError(ErrorCode.NOT_CONVERGED, "no level could be solved", {"tol": tol})
    if not best.converged:
        if strict:
            raise SolverError(
                ErrorCode.NOT_CONVERGED,
                f"levels did not agree to {tol:.1e} (last change {best.error:.2e})",
                {"value": best.value, "error": best.error},
            )
        logger.warning(f"BIE capacity not converged: change {best.error:.2e} > {tol:.1e}")
    # an unconverged sweep is only as consistent as its last change
    best.matrix.check(tol if best.converged else max(tol, best.error))

    solutions = best.matrix.solutions.values()
    diagnostics = {
        "levels": [list(entry) for entry in best.history],
        "unknowns": best.history[-1][1],
        "constant": best.matrix.solutions[Terminal.INNER].constant,
        "converged": best.converged,
        "scheme": best.scheme,
        "fallback": fallback or any(s.fallback for s in solutions),
        "iterations": max(s.iterations for s in solutions),
        "singular_columns": len(best.matrix.discretization.enrichments),
        "matrix": best.matrix.entries.tolist(),
    }
    if keep_density:
        diagnostics["density"] = density_dump(best.matrix.solutions[Terminal.INNER], best.matrix.discretization)
    logger.info(f"BIE capacity {best.value:.15g} ({best.scheme}, level {best.history[-1][0]}, change {best.error:.1e})")
    return CapacityResult(best.value, Method.BIE, best.error, diagnostics)
