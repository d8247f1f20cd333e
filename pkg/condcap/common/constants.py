"""
common/constants.py

This file defines numeric defaults, environment-backed settings and the reference
registry of tabulated condenser capacities.
"""

import logging
import os
from typing import Dict, List

from .types import Method, ReferenceRowConfig

METHOD_TOLERANCES: Dict[Method, float] = {
    Method.THETA: 1e-10,
    Method.SC: 1e-6,
    Method.BIE: 5e-4,
    Method.FD: 3e-2,
}

# geometry
CIRCLE_POLYGON_VERTICES = 512
GEOMETRY_ATOL = 1e-12

# Newton / continuation
NEWTON_MAX_ITER = 60
NEWTON_MAX_HALVINGS = 40
FD_JACOBIAN_STEP = 1e-7
CONTINUATION_MIN_STEPS = 32

# Schwarz-Christoffel
CROWDING_GAP = 1e-290
SC_QUADRATURE_ORDER = 16

# boundary integral
BIE_LEVEL_CAP = 6
BIE_BASE_STEPS = 64
BIE_MIN_EDGE_STEPS = 8
BIE_PROXIMITY_FACTOR = 6
BIE_MAX_UNKNOWNS = 10_000
BIE_RANK_RTOL = 1e-8
BIE_KRYLOV_TOL = 1e-12
BIE_KRYLOV_MAXITER = 200

# finite differences
FD_FEATURE_DIVISOR = 4
FD_BOX_FACTOR = 20.0
FD_BOX_BIAS_RTOL = 0.01
FD_CG_RTOL = 1e-10

TABLES: Dict[int, List[str]] = {
    1: ["A", "B"],
    2: ["C"],
    3: ["D", "E"],
    4: ["F", "G"],
}

# SHA-256 of "\n".join(f"{row_id}={expected}" for row_id in sorted(REFERENCE_ROWS))
REGISTRY_CHECKSUM = "8d34612e5657196965489101f525fa56da2eb765cc1296707bd2b18a85e3f95a"


def get_default_threads() -> int:
    return max(1, int(os.environ.get("CONDCAP_THREADS", os.cpu_count() or 1)))


def get_fd_node_limit() -> int:
    return int(os.environ.get("CONDCAP_FD_NODE_LIMIT", 4_000_000))


def get_bie_max_unknowns() -> int:
    return int(os.environ.get("CONDCAP_BIE_MAX_UNKNOWNS", BIE_MAX_UNKNOWNS))


def get_log_level() -> int:
    name = os.environ.get("CONDCAP_LOG_LEVEL", "WARNING").upper()
    return getattr(logging, name, logging.WARNING)


def _row(table: int, expected: str, family: str, **arrays: List[float]) -> ReferenceRowConfig:
    return ReferenceRowConfig(table=table, spec={"family": family, **arrays}, expected=expected)


X7 = [0, 1, 2, 3, 4, 5, 6, 7]

REFERENCE_ROWS: Dict[str, ReferenceRowConfig] = {
    "A1": _row(1, "9.72079120617096926", "A", x=[0, 1, 3, 4, 5, 6, 9, 11], l=[2]),
    "A2": _row(1, "15.8964033734093744", "A", x=[0, 2, 2.5, 4.5, 5, 6, 10.5, 11], l=[1]),
    "A3": _row(1, "16.5708349921371510", "A", x=[0, 0.5, 5, 7.5, 8, 10, 10.5, 11], l=[1]),
    "A4": _row(1, "9.0776774351927967", "A", x=[0, 1, 1.5, 2, 8, 10, 10.5, 11], l=[3]),
    "A5": _row(1, "12.1642765126444534", "A", x=[0, 2, 2.5, 7.5, 8, 9, 10.9, 11], l=[1]),
    "A6": _row(1, "5.59517889911177450", "A", x=[0, 3, 5, 6, 8, 9, 10, 11], l=[5]),
    "B1": _row(1, "8.86185570899657537", "B", x=[0, 1, 2, 3, 5, 6, 7, 8], y=[2, 1], l=[3]),
    "B2": _row(1, "8.28583441065142426", "B", x=X7, y=[1, 1], l=[2]),
    "B3": _row(1, "8.22274382175325185", "B", x=X7, y=[2, 1], l=[3]),
    "B4": _row(1, "8.11029353036022815", "B", x=X7, y=[1, 2], l=[3]),
    "B5": _row(1, "12.17857832040164176", "B", x=[0, 1, 2, 6, 7, 9, 10, 12], y=[1, 1], l=[2]),
    "B6": _row(1, "10.31120091451990165", "B", x=[0, 1, 2, 6, 7, 9, 10, 11], y=[1, 3], l=[4]),
    "C1": _row(2, "9.438272363758330697", "C", x=[0, 1, 2, 3, 5, 6, 7, 8], y=[2], l=[3, 3, 1]),
    "C2": _row(2, "11.027047279861000458", "C", x=[0, 1, 2, 3, 4, 6, 7, 8], y=[1], l=[2, 3, 1]),
    "C3": _row(2, "8.777515831134811065", "C", x=[0, 1, 2, 3, 4, 5, 7, 8], y=[2], l=[3, 3, 1]),
    "C4": _row(2, "14.988032697667965659", "C", x=[0, 1, 2, 3, 4, 5, 6, 8], y=[3], l=[4, 3, 3]),
    "C5": _row(2, "11.391736530234725936", "C", x=[0, 2, 3, 4, 5, 6, 7, 8], y=[3], l=[4, 5, 3]),
    "C6": _row(2, "9.282399749809620850", "C", x=[0, 1, 2, 4, 5, 6, 7, 8], y=[3], l=[4, 7, 2]),
    "D1": _row(3, "6.298067056123278293", "D", x=[0, 1, 3, 4, 5, 8], l=[2, 3, 2, 2, 3]),
    "D2": _row(3, "8.994834022659064427", "D", x=[0, 2, 3, 4, 7, 8], l=[2, 3, 2, 2, 3]),
    "D3": _row(3, "6.450372178406949499", "D", x=[0, 4, 5, 6, 7, 8], l=[2, 3, 2, 2, 3]),
    "D4": _row(3, "7.438309246517998359", "D", x=[0, 1, 3, 5, 7, 8], l=[2, 3, 3, 2, 3]),
    "D5": _row(3, "5.801923089413399328", "D", x=[0, 1, 3, 4, 5, 8], l=[2, 5, 1, 2, 1]),
    "D6": _row(3, "7.753127034648571466", "D", x=[0, 1, 3, 6, 7, 8], l=[2, 3, 4, 2, 5]),
    "E1": _row(3, "1.56994325474948999", "E", x=[0, 5], y=[1, 2]),
    "E2": _row(3, "1.87306699654806386", "E", x=[0, 5], y=[2, 2]),
    "E3": _row(3, "2.08203777712328096", "E", x=[0, 5], y=[3, 2]),
    "E4": _row(3, "2.23259828277206300", "E", x=[0, 5], y=[4, 2]),
    "E5": _row(3, "2.34158897620030515", "E", x=[0, 5], y=[5, 2]),
    "E6": _row(3, "2.35241226225174034", "E", x=[0, 5], y=[3, 3]),
    "F1": _row(4, "5.6327570222823258486", "F", l1=[3, 4], l2=[1, 1]),
    "F2": _row(4, "8.5383099064779181521", "F", l1=[3, 4], l2=[0.3, 3]),
    "F3": _row(4, "5.7845537023572573861", "F", l1=[3, 4], l2=[2, 0.1]),
    "F4": _row(4, "28.5499438953187884", "F", l1=[1, 4], l2=[0.5, 3]),
    "F5": _row(4, "22.234504016933507380", "F", l1=[2, 5], l2=[1, 4]),
    "F6": _row(4, "7.6417584869737709307", "F", l1=[2, 7], l2=[1.5, 0.2]),
    "G1": _row(4, "9.578338769355109451", "G", l1=[4, 5], l2=[1, 2, 1, 1]),
    "G2": _row(4, "16.076240045355723868", "G", l1=[4, 4], l2=[1, 2, 2, 1]),
    "G3": _row(4, "13.192681030463681933", "G", l1=[5, 4], l2=[1, 2, 2, 1]),
    "G4": _row(4, "14.350501722644794417", "G", l1=[4, 6], l2=[1, 3, 2, 1]),
    "G5": _row(4, "17.116438880060405780", "G", l1=[4, 5], l2=[1, 3, 2, 1]),
    "G6": _row(4, "21.116597096285347718", "G", l1=[4, 6], l2=[1, 3, 2, 2]),
}
