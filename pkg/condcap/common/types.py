"""
common/types.py

This file defines the enums, TypedDicts and immutable value types shared by the
geometry codec, the solvers and the harness.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, TypedDict


class Family(Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"
    G = "G"
    EXPLICIT = "EXPLICIT"


class ContourKind(Enum):
    POLYLINE_CLOSED = "POLYLINE_CLOSED"
    SLOT = "SLOT"
    SLIT_TREE = "SLIT_TREE"
    CIRCLE = "CIRCLE"


class Terminal(Enum):
    OUTER = "OUTER"
    INNER = "INNER"


class ArcLabel(Enum):
    F0 = "F0"
    F1 = "F1"
    N = "N"


class Method(Enum):
    THETA = "theta"
    SC = "sc"
    BIE = "bie"
    FD = "fd"


class SingularKind(Enum):
    CORNER = "CORNER"
    CUSP_TIP = "CUSP_TIP"


class NodeClass(Enum):
    INTERIOR = 0
    PLATE0 = 1
    PLATE1 = 2
    EXTERIOR = 3
    WALL = 4


TERMINAL_LABELS: Dict[Terminal, ArcLabel] = {
    Terminal.OUTER: ArcLabel.F0,
    Terminal.INNER: ArcLabel.F1,
}

INFINITY = complex(math.inf, 0.0)


@dataclass(frozen=True)
class Contour:
    """
    One boundary component of a condenser.

    Polygonal contours are stored as a closed walk that keeps the condenser on its
    left: counterclockwise around the outer contour, clockwise around holes.
    Zero-area parts (slots, slit trees, fins) appear in the walk once per side.
    """

    kind: ContourKind
    terminal: Terminal
    vertices: Tuple[complex, ...] = ()
    center: complex = 0j
    radius: float = 0.0
    orientation: int = 1

    def edges(self) -> List[Tuple[complex, complex]]:
        n = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)]

    def polygonized(self, count: int) -> "Contour":
        if self.kind is not ContourKind.CIRCLE:
            return self
        phases = [2.0 * math.pi * k / count for k in range(count)]
        pts = tuple(
            self.center + self.radius * complex(math.cos(t), self.orientation * math.sin(t))
            for t in phases
        )
        return Contour(ContourKind.POLYLINE_CLOSED, self.terminal, pts, orientation=self.orientation)


@dataclass(frozen=True)
class ContourSet:
    contours: Tuple[Contour, ...]
    bounded: bool

    def by_terminal(self, terminal: Terminal) -> List[Contour]:
        return [c for c in self.contours if c.terminal is terminal]


@dataclass(frozen=True)
class Arc:
    start: int
    end: int
    label: ArcLabel


@dataclass(frozen=True)
class HalfDomainPolygon:
    """
    Labeled boundary polygon of the upper half of a condenser.

    Edge ``k`` joins ``vertices[k]`` to ``vertices[k + 1]`` (cyclically) and carries
    ``edge_labels[k]``. ``angles`` are interior angles divided by pi; a vertex at
    infinity is stored as ``INFINITY`` with angle -1.
    """

    vertices: Tuple[complex, ...]
    angles: Tuple[float, ...]
    edge_labels: Tuple[ArcLabel, ...]
    arcs: Tuple[Arc, ...]
    bounded: bool = True

    @property
    def size(self) -> int:
        return len(self.vertices)

    def side_length(self, k: int) -> float:
        a = self.vertices[k]
        b = self.vertices[(k + 1) % self.size]
        return abs(b - a)

    def arcs_with(self, label: ArcLabel) -> List[Arc]:
        return [arc for arc in self.arcs if arc.label is label]


@dataclass(frozen=True)
class CapacityResult:
    value: float
    method: Method
    rel_err_estimate: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)


class SolveOptions(TypedDict, total=False):
    tol: float
    level: int
    h: float
    scheme: str
    strict: bool
    orientation_check: bool
    keep_density: bool
    max_unknowns: int


class SpecDocument(TypedDict, total=False):
    family: str
    x: List[float]
    y: List[float]
    l: List[float]
    l1: List[float]
    l2: List[float]
    contours: List[Dict[str, Any]]


class ReferenceRowConfig(TypedDict):
    table: int
    spec: SpecDocument
    expected: str


class RowReport(TypedDict):
    id: str
    method: str
    computed: Optional[float]
    expected: float
    rel_error: Optional[float]
    tolerance: float
    passed: bool
    error: Optional[str]


class TableReport(TypedDict):
    selector: str
    methods: List[str]
    rows: List[RowReport]
    passed: int
    failed: int
    skipped: int


class CrossRow(TypedDict):
    id: str
    value_a: Optional[float]
    value_b: Optional[float]
    rel_diff: Optional[float]
    error: Optional[str]


class CrossReport(TypedDict):
    method_a: str
    method_b: str
    rows: List[CrossRow]
    max_rel_diff: Optional[float]
    tolerance: float
    passed: bool
