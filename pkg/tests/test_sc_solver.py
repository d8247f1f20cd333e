import math

import pytest

from condcap.common.constants import REFERENCE_ROWS
from condcap.common.errors import ErrorCode, SolverError
from condcap.common.types import Method
from condcap.geometry import build_contours, half_domain, parse_spec
from condcap.solvers import capacity_sc, moebius_modulus, n_endpoint_preimages, solve_parameter_problem
from condcap.solvers.sc_solver import lauricella_check

SC_ROWS = [row_id for row_id in REFERENCE_ROWS if row_id[0] in "FG"]


def _poly(row_id):
    return half_domain(build_contours(parse_spec(REFERENCE_ROWS[row_id]["spec"])))


def test_moebius_modulus_of_symmetric_points():
    k, kp = moebius_modulus((-1.0, 1.0, 2.0, -2.0))
    assert k == pytest.approx(0.5, rel=1e-15)
    assert kp == pytest.approx(math.sqrt(0.75), rel=1e-15)


def test_moebius_modulus_is_invariant_under_affine_maps():
    points = (-1.0, 1.0, 1.0 / 0.3, -1.0 / 0.3)
    moved = tuple(3.0 * z + 7.0 for z in points)
    assert moebius_modulus(moved)[0] == pytest.approx(moebius_modulus(points)[0], rel=1e-14)
    assert moebius_modulus(points)[0] == pytest.approx(0.3, rel=1e-14)


def test_moebius_modulus_with_point_at_infinity():
    # (-1, 1, 1/k, -1/k) sent by z -> -1 / (z + 1/k) keeps the cross ratio and moves -1/k to infinity
    k = 0.4
    points = (-1.0, 1.0, 1.0 / k, -1.0 / k)
    moved = tuple(-1.0 / (z + 1.0 / k) if z != -1.0 / k else math.inf for z in points)
    assert moebius_modulus(moved)[0] == pytest.approx(k, rel=1e-13)


def test_moebius_modulus_rejects_repeated_points():
    with pytest.raises(SolverError) as info:
        moebius_modulus((0.0, 1.0, 1.0, 2.0))
    assert info.value.code is ErrorCode.DEGENERATE


def test_parameter_problem_orders_arc_endpoints():
    poly = _poly("F1")
    params = solve_parameter_problem(poly)
    assert params.prevertices[0] == math.inf
    assert all(g > 0 for g in params.gaps[1:])
    preimages = n_endpoint_preimages(poly, params)
    finite = [z for z in preimages if math.isfinite(z)]
    assert len(set(finite)) == len(finite)


def test_square_in_rectangle():
    result = capacity_sc(_poly("F1"), check=True)
    assert result.method is Method.SC
    assert result.value == pytest.approx(float(REFERENCE_ROWS["F1"]["expected"]), rel=1e-6)
    assert result.diagnostics["lauricella_max_deviation"] < 1e-8


def test_lauricella_cross_check_per_side():
    deviations = []
    for row_id in ("F1", "G1"):
        poly = _poly(row_id)
        deviations += lauricella_check(solve_parameter_problem(poly), poly)
    assert len(deviations) >= 10
    assert max(d for _, d in deviations) < 1e-10


def test_orientation_flip_is_detected():
    poly = _poly("F1")
    value = capacity_sc(poly).value
    with pytest.raises(SolverError) as info:
        capacity_sc(poly, reference=1.0 / value)
    assert info.value.code is ErrorCode.ORIENTATION_FLIP


@pytest.mark.slow
@pytest.mark.parametrize("row_id", SC_ROWS)
def test_reference_rows(row_id):
    result = capacity_sc(_poly(row_id))
    assert result.value == pytest.approx(float(REFERENCE_ROWS[row_id]["expected"]), rel=1e-6)


def _explicit(outer, inner):
    return parse_spec(
        {
            "family": "EXPLICIT",
            "contours": [
                {"kind": "POLYLINE_CLOSED", "terminal": "OUTER", "vertices": outer},
                {"kind": "POLYLINE_CLOSED", "terminal": "INNER", "vertices": inner},
            ],
        }
    )


def test_capacity_is_invariant_under_translation_and_scaling():
    outer = [[-4, -3], [4, -3], [4, 3], [-4, 3]]
    inner = [[-1, -1], [1, -1], [1, 1], [-1, 1]]
    base = _explicit(outer, inner)
    moved = _explicit([[x + 7.5, y] for x, y in outer], [[x + 7.5, y] for x, y in inner])
    value = capacity_sc(half_domain(build_contours(base))).value
    assert capacity_sc(half_domain(build_contours(moved))).value == pytest.approx(value, rel=1e-10)
    scaled = half_domain(build_contours(base.scaled(0.37)))
    assert capacity_sc(scaled).value == pytest.approx(value, rel=1e-10)
    assert capacity_sc(half_domain(build_contours(parse_spec(REFERENCE_ROWS["G1"]["spec"]).scaled(3.0)))).value == (
        pytest.approx(float(REFERENCE_ROWS["G1"]["expected"]), rel=1e-6)
    )


@pytest.mark.parametrize("row_id", ["F3", "F6", "G1"])
def test_endpoint_preimages_of_thin_and_stepped_plates(row_id):
    poly = _poly(row_id)
    preimages = n_endpoint_preimages(poly, solve_parameter_problem(poly))
    finite = [z for z in preimages if math.isfinite(z)]
    assert len(finite) >= 3
    assert len(set(finite)) == len(finite)
    k, kp = moebius_modulus(preimages)
    assert 0 < k < 1
    assert k * k + kp * kp == pytest.approx(1.0, rel=1e-12)


def test_endpoint_preimages_need_two_neumann_arcs():
    params = solve_parameter_problem(_poly("F1"))
    with pytest.raises(SolverError) as info:
        n_endpoint_preimages(_poly("A1"), params)
    assert info.value.code is ErrorCode.WRONG_ARC_COUNT
