"""
geometry/contours.py

This file decodes a CondenserSpec into explicit boundary contours. Each family is
described by a small builder producing plain line segments; the segments are noded
with shapely and traced into closed walks that keep the condenser on their left.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from shapely import affinity
from shapely.geometry import LineString, MultiLineString, Point, Polygon
from shapely.geometry.base import BaseGeometry
from shapely.ops import unary_union
from toolz import sliding_window

from ..common.constants import CIRCLE_POLYGON_VERTICES, GEOMETRY_ATOL
from ..common.errors import ErrorCode, GeometryError
from ..common.types import Contour, ContourKind, ContourSet, Family, Terminal
from .spec import CondenserSpec

logger = logging.getLogger("condcap.geometry")

Segment = Tuple[complex, complex]
Key = Tuple[float, float]


@dataclass(frozen=True)
class _Piece:
    kind: ContourKind
    terminal: Terminal
    segments: Tuple[Segment, ...]
    encloses: bool = False


def _key(z: complex) -> Key:
    return (round(z.real, 12) + 0.0, round(z.imag, 12) + 0.0)


def _rectangle(x0: float, x1: float, h: float) -> List[Segment]:
    corners = [complex(x0, -h), complex(x1, -h), complex(x1, h), complex(x0, h)]
    return list(zip(corners, corners[1:] + corners[:1]))


def _axis_segment(a: float, b: float) -> List[Segment]:
    return [(complex(a, 0.0), complex(b, 0.0))]


def _vertical(x: float, h: float) -> List[Segment]:
    return [(complex(x, -h), complex(x, h))]


def _mirrored_chain(points: Sequence[complex]) -> List[Segment]:
    upper = list(sliding_window(2, points))
    return upper + [(a.conjugate(), b.conjugate()) for a, b in upper]


def _quarter_chain(lengths: Sequence[float]) -> List[complex]:
    """Chain alternating up/right from the axis, ending on the line x = 0."""
    z = complex(-sum(lengths[1::2]), 0.0)
    points = [z]
    for i, d in enumerate(lengths):
        z += complex(0.0, d) if i % 2 == 0 else d
        points.append(z)
    return points


def _four_fold(points: Sequence[complex]) -> List[Segment]:
    quarter = list(sliding_window(2, points))
    images = []
    for fx, fy in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        images += [
            (complex(fx * a.real, fy * a.imag), complex(fx * b.real, fy * b.imag)) for a, b in quarter
        ]
    return images


def _ambiguous(spec: CondenserSpec, reason: str) -> GeometryError:
    return GeometryError(
        ErrorCode.DECODE_AMBIGUOUS, f"family {spec.family.value}: {reason}", spec.to_document()
    )


def _half_height(spec: CondenserSpec) -> float:
    p = spec.x
    if len(spec.l) == 2 and abs(spec.l[1] - (p[-1] - p[0])) > GEOMETRY_ATOL * (1.0 + p[-1]):
        raise _ambiguous(spec, "second L value must equal the outer width")
    return spec.l[0]


def _family_a(spec: CondenserSpec) -> List[_Piece]:
    p, h = spec.x, _half_height(spec)
    pieces = [_Piece(ContourKind.POLYLINE_CLOSED, Terminal.OUTER, tuple(_rectangle(p[0], p[7], h)), True)]
    pieces += [
        _Piece(ContourKind.SLOT, Terminal.INNER, tuple(_axis_segment(p[i], p[i + 1])))
        for i in (1, 3, 5)
    ]
    return pieces


def _family_b(spec: CondenserSpec) -> List[_Piece]:
    p, h = spec.x, _half_height(spec)
    y0, y1 = spec.y
    if max(y0, y1) >= h:
        raise _ambiguous(spec, "vertical slits must stay below the outer wall")
    outer = _rectangle(p[0], p[7], h) + _axis_segment(p[6], p[7])
    cross = _axis_segment(p[1], p[3]) + _vertical(p[2], y0)
    tee = _axis_segment(p[4], p[5]) + _vertical(p[4], y1)
    return [
        _Piece(ContourKind.POLYLINE_CLOSED, Terminal.OUTER, tuple(outer), True),
        _Piece(ContourKind.SLIT_TREE, Terminal.INNER, tuple(cross)),
        _Piece(ContourKind.SLIT_TREE, Terminal.INNER, tuple(tee)),
    ]


def _family_c(spec: CondenserSpec) -> List[_Piece]:
    p = spec.x
    l0, l1, l2 = spec.l
    if not l1 < p[7] - p[0] or not l2 < l0:
        raise _ambiguous(spec, "stepped chain does not close inside [x0, x7]")
    chain = [
        complex(p[0], 0.0),
        complex(p[0], l0),
        complex(p[0] + l1, l0),
        complex(p[0] + l1, l0 - l2),
        complex(p[7], l0 - l2),
        complex(p[7], 0.0),
    ]
    outer = _mirrored_chain(chain) + _axis_segment(p[0], p[1]) + _axis_segment(p[6], p[7])
    tee = _axis_segment(p[2], p[3]) + _vertical(p[2], spec.y[0])
    return [
        _Piece(ContourKind.POLYLINE_CLOSED, Terminal.OUTER, tuple(outer), True),
        _Piece(ContourKind.SLIT_TREE, Terminal.INNER, tuple(tee)),
        _Piece(ContourKind.SLOT, Terminal.INNER, tuple(_axis_segment(p[4], p[5]))),
    ]


def _family_d(spec: CondenserSpec) -> List[_Piece]:
    p = spec.x
    l0, l1, l2, l3, l4 = spec.l
    if not l1 + l3 < p[5] - p[0] or not l0 + l2 - l4 > 0:
        raise _ambiguous(spec, "chain does not close above the axis inside [x0, x5]")
    right = p[0] + l1 + l3
    chain = [
        complex(p[0], 0.0),
        complex(p[0], l0),
        complex(p[0] + l1, l0),
        complex(p[0] + l1, l0 + l2),
        complex(right, l0 + l2),
        complex(right, l0 + l2 - l4),
        complex(p[5], l0 + l2 - l4),
        complex(p[5], 0.0),
    ]
    return [
        _Piece(ContourKind.POLYLINE_CLOSED, Terminal.OUTER, tuple(_mirrored_chain(chain)), True),
        _Piece(ContourKind.SLOT, Terminal.INNER, tuple(_axis_segment(p[1], p[2]))),
        _Piece(ContourKind.SLOT, Terminal.INNER, tuple(_axis_segment(p[3], p[4]))),
    ]


def _family_e(spec: CondenserSpec) -> List[_Piece]:
    return [
        _Piece(ContourKind.SLOT, Terminal.OUTER, tuple(_vertical(spec.x[0], spec.y[0]))),
        _Piece(ContourKind.SLOT, Terminal.INNER, tuple(_vertical(spec.x[1], spec.y[1]))),
    ]


def _family_fg(spec: CondenserSpec) -> List[_Piece]:
    return [
        _Piece(ContourKind.POLYLINE_CLOSED, Terminal.OUTER, tuple(_four_fold(_quarter_chain(spec.l1))), True),
        _Piece(ContourKind.POLYLINE_CLOSED, Terminal.INNER, tuple(_four_fold(_quarter_chain(spec.l2)))),
    ]


FAMILY_BUILDERS: Dict[Family, Callable[[CondenserSpec], List[_Piece]]] = {
    Family.A: _family_a,
    Family.B: _family_b,
    Family.C: _family_c,
    Family.D: _family_d,
    Family.E: _family_e,
    Family.F: _family_fg,
    Family.G: _family_fg,
}


def node_segments(segments: Iterable[Segment]) -> List[Segment]:
    """Split segments at every mutual intersection and drop duplicates."""
    lines = [LineString([(a.real, a.imag), (b.real, b.imag)]) for a, b in segments]
    merged = unary_union(lines)
    noded: Dict[Tuple[Key, Key], Segment] = {}
    for geom in getattr(merged, "geoms", [merged]):
        for (x0, y0), (x1, y1) in sliding_window(2, list(geom.coords)):
            a, b = complex(x0, y0), complex(x1, y1)
            ka, kb = _key(a), _key(b)
            if ka != kb:
                noded[tuple(sorted((ka, kb)))] = (a, b)
    return list(noded.values())


def clockwise_turn(incoming: complex, outgoing: complex) -> float:
    """Clockwise angle from the reversed incoming direction to ``outgoing``; a retrace counts as 2*pi."""
    back = math.atan2(-incoming.imag, -incoming.real)
    angle = (back - math.atan2(outgoing.imag, outgoing.real)) % (2.0 * math.pi)
    if angle < 1e-12 or angle > 2.0 * math.pi - 1e-12:
        return 2.0 * math.pi
    return angle


def trace_walk(
    segments: Sequence[Segment], encloses: bool
) -> Tuple[List[complex], int]:
    """
    Trace the face walk of a connected set of segments.

    Args:
        segments: noded segments of one boundary component.
        encloses: True for the outer boundary of a bounded condenser (walk runs
            counterclockwise inside it), False for a hole or plate (walk runs
            clockwise around it).

    Returns:
        The walk vertices and the number of undirected segments it missed.
    """
    points: Dict[Key, complex] = {}
    adjacency: Dict[Key, List[Key]] = {}
    for a, b in segments:
        ka, kb = _key(a), _key(b)
        points.setdefault(ka, a)
        points.setdefault(kb, b)
        adjacency.setdefault(ka, []).append(kb)
        adjacency.setdefault(kb, []).append(ka)

    start = min(points, key=lambda k: (k[1], k[0]))
    polar = {nb: math.atan2(nb[1] - start[1], nb[0] - start[0]) for nb in adjacency[start]}
    pick = min if encloses else max
    first = pick(polar, key=polar.get)

    used = set()
    walk: List[complex] = []
    edge = (start, first)
    while edge not in used:
        used.add(edge)
        a, b = edge
        walk.append(points[a])
        incoming = points[b] - points[a]
        nxt = min(adjacency[b], key=lambda nb: clockwise_turn(incoming, points[nb] - points[b]))
        edge = (b, nxt)

    covered = {tuple(sorted(e)) for e in used}
    missed = len({tuple(sorted((_key(a), _key(b)))) for a, b in segments} - covered)
    return walk, missed


def drop_straight_vertices(walk: Sequence[complex]) -> List[complex]:
    """Drop pass-through vertices; junctions visited more than once are kept."""
    n = len(walk)
    if n < 3:
        return list(walk)
    visits = Counter(_key(z) for z in walk)
    kept = []
    for i in range(n):
        if visits[_key(walk[i])] > 1:
            kept.append(walk[i])
            continue
        d_in = walk[i] - walk[i - 1]
        d_out = walk[(i + 1) % n] - walk[i]
        cross = d_in.real * d_out.imag - d_in.imag * d_out.real
        dot = d_in.real * d_out.real + d_in.imag * d_out.imag
        if abs(cross) <= GEOMETRY_ATOL * abs(d_in) * abs(d_out) and dot > 0:
            continue
        kept.append(walk[i])
    return kept


def core_ring(walk: Sequence[complex]) -> List[complex]:
    """Remove zero-area spikes (fins, slits) from a closed walk."""
    pts = list(walk)
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        n = len(pts)
        for i in range(n):
            if _key(pts[i - 1]) == _key(pts[(i + 1) % n]):
                drop = {i, (i + 1) % n}
                pts = [p for j, p in enumerate(pts) if j not in drop]
                changed = True
                break
    pts = drop_straight_vertices(pts)
    return pts if len(pts) >= 3 else []


def signed_area(ring: Sequence[complex]) -> float:
    return 0.5 * sum(a.real * b.imag - b.real * a.imag for a, b in zip(ring, list(ring[1:]) + list(ring[:1])))


def _walk_piece(piece: _Piece) -> Contour:
    walk, missed = trace_walk(node_segments(piece.segments), piece.encloses)
    if missed:
        raise GeometryError(
            ErrorCode.SELF_INTERSECTION,
            f"{piece.terminal.value} {piece.kind.value} boundary is not a single connected walk",
        )
    walk = drop_straight_vertices(walk)
    return Contour(piece.kind, piece.terminal, tuple(walk), orientation=1 if piece.encloses else -1)


def _explicit_pieces(spec: CondenserSpec) -> List[Contour]:
    contours: List[Contour] = []
    for entry in spec.contours or ():
        pts = [complex(px, py) for px, py in entry.vertices]
        if entry.kind is ContourKind.CIRCLE:
            orientation = 1 if entry.terminal is Terminal.OUTER else -1
            contours.append(
                Contour(
                    ContourKind.CIRCLE,
                    entry.terminal,
                    center=complex(*entry.center),
                    radius=float(entry.radius),
                    orientation=orientation,
                )
            )
            continue
        if entry.kind is ContourKind.POLYLINE_CLOSED:
            segments = list(zip(pts, pts[1:] + pts[:1]))
            encloses = entry.terminal is Terminal.OUTER
        else:
            segments = list(zip(pts[0::2], pts[1::2]))
            encloses = False
        for a, b in segments:
            if abs(b - a) <= GEOMETRY_ATOL:
                raise GeometryError(ErrorCode.NONPOSITIVE_LENGTH, "explicit contour has a zero-length segment")
        contours.append(_walk_piece(_Piece(entry.kind, entry.terminal, tuple(segments), encloses)))
    return contours


def build_contours(spec: CondenserSpec) -> ContourSet:
    """
    Decode a spec into its full-plane, mirror-symmetric contour set.

    Args:
        spec: a validated CondenserSpec.

    Returns:
        ContourSet whose polygonal contours are closed walks with the condenser on
        their left.

    Example:
        >>> cset = build_contours(parse_spec({"family": "E", "x": [0, 5], "y": [1, 2]}))
        >>> [c.vertices for c in cset.contours]
        [(-1j, 1j), ((5-2j), (5+2j))]
    """
    if spec.family is Family.EXPLICIT:
        contours = _explicit_pieces(spec)
        bounded = any(c.orientation > 0 for c in contours)
    else:
        contours = [_walk_piece(piece) for piece in FAMILY_BUILDERS[spec.family](spec)]
        bounded = spec.family is not Family.E
    cset = ContourSet(tuple(contours), bounded)
    validate_contours(cset)
    logger.debug(f"Built {len(contours)} contours for family {spec.family.value}")
    return cset


def contour_lines(contour: Contour) -> BaseGeometry:
    if contour.kind is ContourKind.CIRCLE:
        return Point(contour.center.real, contour.center.imag).buffer(contour.radius, quad_segs=128).exterior
    return MultiLineString([[(a.real, a.imag), (b.real, b.imag)] for a, b in contour.edges()])


def contour_region(contour: Contour) -> Optional[Polygon]:
    """Area enclosed by a contour, or None for zero-area plates."""
    if contour.kind is ContourKind.CIRCLE:
        return Point(contour.center.real, contour.center.imag).buffer(contour.radius, quad_segs=128)
    ring = core_ring(contour.vertices)
    if not ring:
        return None
    return Polygon([(z.real, z.imag) for z in ring])


def validate_contours(cset: ContourSet) -> None:
    lines = [contour_lines(c) for c in cset.contours]
    regions = [contour_region(c) for c in cset.contours]
    for contour, region in zip(cset.contours, regions):
        if region is not None and not region.is_valid:
            raise GeometryError(
                ErrorCode.SELF_INTERSECTION, f"{contour.terminal.value} contour is not a simple polygon"
            )
        if region is not None and contour.kind is not ContourKind.CIRCLE:
            area = signed_area(core_ring(contour.vertices))
            if (area > 0) != (contour.orientation > 0):
                raise GeometryError(ErrorCode.SELF_INTERSECTION, "contour walk has the wrong orientation")
    outers = [i for i, c in enumerate(cset.contours) if c.orientation > 0]
    if cset.bounded and len(outers) != 1:
        raise GeometryError(ErrorCode.SELF_INTERSECTION, "a bounded condenser needs exactly one enclosing contour")
    for i, ci in enumerate(cset.contours):
        for j in range(i + 1, len(cset.contours)):
            if lines[i].intersects(lines[j]):
                raise GeometryError(ErrorCode.SELF_INTERSECTION, f"contours {i} and {j} intersect")
            for a, b in ((i, j), (j, i)):
                if cset.contours[b].orientation < 0 and regions[b] is not None and regions[b].intersects(lines[a]):
                    raise GeometryError(ErrorCode.SELF_INTERSECTION, f"contour {a} lies inside contour {b}")
    if cset.bounded:
        outer = regions[outers[0]]
        for i, line in enumerate(lines):
            if i != outers[0] and not outer.contains(line):
                raise GeometryError(ErrorCode.SELF_INTERSECTION, f"contour {i} leaves the outer contour")


def boundary_geometry(cset: ContourSet) -> BaseGeometry:
    return unary_union([contour_lines(c.polygonized(CIRCLE_POLYGON_VERTICES)) for c in cset.contours])


def is_mirror_symmetric(cset: ContourSet) -> bool:
    geom = boundary_geometry(cset)
    mirror = affinity.scale(geom, xfact=1.0, yfact=-1.0, origin=(0.0, 0.0))
    return geom.symmetric_difference(mirror).length <= 1e-9 * max(1.0, geom.length)


def same_segments(first: Iterable[Segment], second: Iterable[Segment], tol: float = 1e-12) -> bool:
    a = unary_union([LineString([(p.real, p.imag), (q.real, q.imag)]) for p, q in first])
    b = unary_union([LineString([(p.real, p.imag), (q.real, q.imag)]) for p, q in second])
    return a.symmetric_difference(b).length <= tol * max(1.0, a.length)


def min_feature_size(cset: ContourSet) -> float:
    """Smallest positive gap between distinct vertex abscissae or ordinates (axis included)."""
    xs, ys = set(), {0.0}
    for c in cset.contours:
        if c.kind is ContourKind.CIRCLE:
            xs.update((c.center.real - c.radius, c.center.real + c.radius))
            ys.update((c.center.imag - c.radius, c.center.imag + c.radius))
            continue
        for z in c.vertices:
            xs.add(round(z.real, 12))
            ys.add(round(z.imag, 12))
    gaps = [b - a for values in (sorted(xs), sorted(ys)) for a, b in sliding_window(2, values) if b - a > GEOMETRY_ATOL]
    return min(gaps) if gaps else 1.0
