"""
geometry/half_domain.py

Symmetry reduction: intersect a mirror-symmetric condenser with the upper half-plane
and describe the result as a labeled polygon whose boundary splits into the
Dirichlet arcs F0, F1 and the Neumann arc N on the symmetry axis.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

from ..common.constants import CIRCLE_POLYGON_VERTICES, GEOMETRY_ATOL
from ..common.errors import ErrorCode, GeometryError
from ..common.types import (
    INFINITY,
    TERMINAL_LABELS,
    Arc,
    ArcLabel,
    ContourSet,
    HalfDomainPolygon,
)
from .contours import Segment, _key, clockwise_turn, is_mirror_symmetric

logger = logging.getLogger("condcap.geometry")

LabeledEdge = Tuple[complex, complex, ArcLabel]


def _snap(z: complex) -> complex:
    return complex(z.real, 0.0) if abs(z.imag) <= GEOMETRY_ATOL else z


def _upper_part(a: complex, b: complex) -> Optional[Tuple[complex, complex]]:
    a, b = _snap(a), _snap(b)
    if a.imag >= 0 and b.imag >= 0:
        if a.imag == 0 and b.imag == 0:
            # keep the axis side whose left normal points up
            return (a, b) if b.real > a.real else None
        return a, b
    if a.imag <= 0 and b.imag <= 0:
        return None
    t = a.imag / (a.imag - b.imag)
    m = complex(a.real + t * (b.real - a.real), 0.0)
    return (a, m) if a.imag > 0 else (m, b)


def winding_number(z: complex, edges: Sequence[Tuple[complex, complex]]) -> int:
    total = 0.0
    for a, b in edges:
        u, v = a - z, b - z
        total += math.atan2(u.real * v.imag - u.imag * v.real, u.real * v.real + u.imag * v.imag)
    return int(round(total / (2.0 * math.pi)))


def _direction(a: complex, b: complex) -> complex:
    if math.isinf(a.real) or math.isinf(b.real):
        return 1.0 + 0.0j
    return b - a


def vertex_angle(d_in: complex, d_out: complex) -> float:
    """Interior angle / pi between consecutive boundary directions (domain on the left)."""
    cross = d_in.real * d_out.imag - d_in.imag * d_out.real
    dot = d_in.real * d_out.real + d_in.imag * d_out.imag
    turn = math.atan2(cross, dot)
    if abs(abs(turn) - math.pi) <= 1e-12:
        return 2.0
    alpha = 1.0 - turn / math.pi
    half = round(2.0 * alpha) / 2.0
    return half if abs(alpha - half) <= 1e-12 else alpha


def _arcs(labels: Sequence[ArcLabel]) -> Tuple[Arc, ...]:
    k = len(labels)
    first = next((i for i in range(k) if labels[i] is not labels[i - 1]), 0)
    arcs: List[Arc] = []
    start = first
    for step in range(1, k + 1):
        i = (first + step) % k
        if step == k or labels[i] is not labels[start]:
            arcs.append(Arc(start, i, labels[start]))
            start = i
    return tuple(arcs)


def polygon_from_vertices(
    vertices: Sequence[complex], edge_labels: Sequence[ArcLabel], merge: bool = True
) -> HalfDomainPolygon:
    """
    Build a HalfDomainPolygon from a counterclockwise vertex cycle.

    Args:
        vertices: boundary vertices with the domain on the left; ``INFINITY`` marks
            a vertex at infinity joining two axis rays.
        edge_labels: label of the edge leaving each vertex.
        merge: drop straight vertices between edges of equal label.

    Returns:
        The labeled polygon with angles computed from edge directions.
    """
    verts = list(vertices)
    labels = list(edge_labels)
    changed = True
    while changed:
        changed = False
        k = len(verts)
        angles = []
        for i in range(k):
            if math.isinf(verts[i].real):
                angles.append(-1.0)
                continue
            d_in = _direction(verts[i - 1], verts[i])
            d_out = _direction(verts[i], verts[(i + 1) % k])
            angles.append(vertex_angle(d_in, d_out))
        if not merge:
            break
        for i in range(k):
            if angles[i] == 1.0 and labels[i - 1] is labels[i]:
                del verts[i]
                del labels[i]
                changed = True
                break
    bounded = not any(math.isinf(z.real) for z in verts)
    return HalfDomainPolygon(tuple(verts), tuple(angles), tuple(labels), _arcs(labels), bounded)


def _clipped_edges(cset: ContourSet) -> List[LabeledEdge]:
    edges: List[LabeledEdge] = []
    for contour in cset.contours:
        label = TERMINAL_LABELS[contour.terminal]
        for a, b in contour.polygonized(CIRCLE_POLYGON_VERTICES).edges():
            part = _upper_part(a, b)
            if part is not None:
                edges.append((part[0], part[1], label))
    return edges


def _axis_edges(cset: ContourSet, edges: List[LabeledEdge]) -> List[LabeledEdge]:
    walks = [e for c in cset.contours for e in c.polygonized(CIRCLE_POLYGON_VERTICES).edges()]
    target = 1 if cset.bounded else 0

    def inside(x: float) -> bool:
        return winding_number(complex(x, 0.0), walks) == target

    on_axis = [(min(a.real, b.real), max(a.real, b.real)) for a, b, _ in edges if a.imag == 0 and b.imag == 0]
    xs = sorted({round(z.real, 12) for a, b, _ in edges for z in (a, b) if z.imag == 0})
    added: List[LabeledEdge] = []
    for xa, xb in zip(xs, xs[1:]):
        covered = any(lo <= xa + GEOMETRY_ATOL and xb <= hi + GEOMETRY_ATOL for lo, hi in on_axis)
        if not covered and inside(0.5 * (xa + xb)):
            added.append((complex(xa, 0.0), complex(xb, 0.0), ArcLabel.N))
    if not cset.bounded and xs:
        span = 1.0 + xs[-1] - xs[0]
        if inside(xs[0] - span) and inside(xs[-1] + span):
            added.append((INFINITY, complex(xs[0], 0.0), ArcLabel.N))
            added.append((complex(xs[-1], 0.0), INFINITY, ArcLabel.N))
    return added


def _trace_cycle(edges: List[LabeledEdge]) -> List[int]:
    outgoing: Dict[Tuple[float, float], List[int]] = {}
    for idx, (a, _, _) in enumerate(edges):
        outgoing.setdefault(_vertex_key(a), []).append(idx)

    axis_starts = [i for i, (a, _, _) in enumerate(edges) if math.isinf(a.real)]
    if not axis_starts:
        axis_starts = sorted(
            (i for i, (a, _, _) in enumerate(edges) if a.imag == 0),
            key=lambda i: (edges[i][0].real, edges[i][2] is not ArcLabel.N),
        )
    if not axis_starts:
        raise GeometryError(ErrorCode.NOT_SIMPLY_CONNECTED, "half domain does not touch the symmetry axis")
    start = axis_starts[0]

    cycle = [start]
    seen = {start}
    current = start
    while True:
        a, b, _ = edges[current]
        candidates = outgoing.get(_vertex_key(b), [])
        if not candidates:
            raise GeometryError(ErrorCode.NOT_SIMPLY_CONNECTED, "half domain boundary is not closed")
        d_in = _direction(a, b)
        nxt = min(candidates, key=lambda j: clockwise_turn(d_in, _direction(edges[j][0], edges[j][1])))
        if nxt == start:
            break
        if nxt in seen:
            raise GeometryError(ErrorCode.NOT_SIMPLY_CONNECTED, "half domain boundary revisits an edge")
        cycle.append(nxt)
        seen.add(nxt)
        current = nxt
    if len(cycle) != len(edges):
        raise GeometryError(
            ErrorCode.NOT_SIMPLY_CONNECTED,
            f"half domain has {len(edges) - len(cycle)} boundary edges outside the main cycle",
        )
    return cycle


def _vertex_key(z: complex) -> Tuple[float, float]:
    return (math.inf, 0.0) if math.isinf(z.real) else _key(z)


def half_domain(contours: ContourSet) -> HalfDomainPolygon:
    """
    Reduce a mirror-symmetric condenser to its upper half.

    Args:
        contours: the full-plane contour set.

    Returns:
        HalfDomainPolygon whose vertex cycle starts at the leftmost axis point (or
        at infinity for unbounded condensers).

    Example:
        >>> poly = half_domain(build_contours(parse_spec({"family": "F", "l1": [3, 4], "l2": [1, 1]})))
        >>> poly.size, sum(poly.angles)
        (8, 6.0)
    """
    if not is_mirror_symmetric(contours):
        raise GeometryError(ErrorCode.NOT_SYMMETRIC, "contour set is not symmetric about the real axis")
    edges = _clipped_edges(contours)
    edges += _axis_edges(contours, edges)
    cycle = _trace_cycle(edges)
    poly = polygon_from_vertices([edges[i][0] for i in cycle], [edges[i][2] for i in cycle])
    logger.debug(f"Half domain: K={poly.size}, angle sum {sum(poly.angles)}, arcs {len(poly.arcs)}")
    return poly


def reflect_half_domain(poly: HalfDomainPolygon) -> List[Segment]:
    """Rebuild the full condenser boundary segments from a half domain."""
    segments: List[Segment] = []
    k = poly.size
    for i, label in enumerate(poly.edge_labels):
        a, b = poly.vertices[i], poly.vertices[(i + 1) % k]
        if label is ArcLabel.N or math.isinf(a.real) or math.isinf(b.real):
            continue
        segments.append((a, b))
        if a.imag != 0 or b.imag != 0:
            segments.append((a.conjugate(), b.conjugate()))
    return segments
