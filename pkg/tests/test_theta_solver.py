import numpy as np
import numpy.testing as npt
import pytest

from condcap.common.constants import REFERENCE_ROWS
from condcap.common.errors import ErrorCode, GeometryError, SolverError
from condcap.common.types import Method
from condcap.geometry import parse_spec
from condcap.solvers import (
    SlotPairGeometry,
    capacity_E,
    continuation,
    damped_newton,
    residual_E,
    sc_map_w,
    solve_E,
)
from condcap.solvers.theta_solver import initial_guess

E_ROWS = [row_id for row_id in REFERENCE_ROWS if row_id.startswith("E")]


def test_newton_on_circle_and_line():
    def fun(x):
        return np.array([x[0] ** 2 + x[1] ** 2 - 4.0, x[0] - x[1]])

    result = damped_newton(fun, np.array([1.0, 0.5]))
    assert result.converged
    npt.assert_allclose(result.x, [np.sqrt(2.0), np.sqrt(2.0)], rtol=1e-12)


def test_newton_with_analytic_jacobian():
    def fun(x):
        return np.array([np.exp(x[0]) - 2.0])

    result = damped_newton(fun, np.array([0.0]), jac=lambda x: np.array([[np.exp(x[0])]]))
    npt.assert_allclose(result.x, [np.log(2.0)], rtol=1e-13)


def test_newton_start_outside_domain():
    with pytest.raises(SolverError) as info:
        damped_newton(lambda x: x, np.array([-1.0]), admissible=lambda x: bool(x[0] > 0))
    assert info.value.code is ErrorCode.LEFT_DOMAIN


def test_continuation_follows_square_root():
    result = continuation(
        lambda p: (lambda x: x ** 2 - p),
        np.array([1.0]),
        np.array([9.0]),
        np.array([1.0]),
        admissible=lambda x: bool(x[0] > 0),
    )
    assert result.converged
    npt.assert_allclose(result.x, [3.0], rtol=1e-12)


def test_slot_geometry_rejects_nonpositive_lengths():
    with pytest.raises(GeometryError):
        SlotPairGeometry(5.0, 0.0, 1.0)


def test_slot_geometry_only_for_family_e():
    with pytest.raises(SolverError) as info:
        SlotPairGeometry.from_spec(parse_spec(REFERENCE_ROWS["A1"]["spec"]))
    assert info.value.code is ErrorCode.METHOD_SCOPE


def test_solution_maps_critical_points_onto_slot_tips():
    geom = SlotPairGeometry(5.0, 1.0, 2.0)
    params = solve_E(geom)
    npt.assert_allclose(residual_E(params, geom), 0.0, atol=1e-10)
    assert sc_map_w(params.c1, params, geom.l).imag == pytest.approx(1.0, abs=1e-10)
    assert sc_map_w(params.c2, params, geom.l).imag == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("row_id", E_ROWS)
def test_reference_rows(row_id):
    row = REFERENCE_ROWS[row_id]
    result = capacity_E(SlotPairGeometry.from_spec(parse_spec(row["spec"])))
    assert result.method is Method.THETA
    assert result.value == pytest.approx(float(row["expected"]), rel=1e-10)
    assert result.rel_err_estimate < 1e-10


@pytest.mark.parametrize("s", [0.5, 2.0, 13.0])
def test_capacity_is_scale_invariant(s):
    spec = parse_spec(REFERENCE_ROWS["E1"]["spec"])
    scaled = capacity_E(SlotPairGeometry.from_spec(spec.scaled(s))).value
    assert scaled == pytest.approx(float(REFERENCE_ROWS["E1"]["expected"]), rel=1e-10)


def test_capacity_is_symmetric_in_the_slots():
    first = capacity_E(SlotPairGeometry(5.0, 1.0, 2.0)).value
    assert capacity_E(SlotPairGeometry(5.0, 2.0, 1.0)).value == pytest.approx(first, rel=1e-12)


def test_capacity_grows_with_the_outer_slot():
    values = [capacity_E(SlotPairGeometry(5.0, h1, 2.0)).value for h1 in (1.0, 2.0, 3.0, 4.0, 5.0)]
    assert values == sorted(values)


@pytest.mark.parametrize("guess", ["cot", pytest.param("fd", marks=pytest.mark.slow)])
def test_initial_guesses_reach_the_same_solution(guess):
    geom = SlotPairGeometry(5.0, 3.0, 3.0)
    result = capacity_E(geom, guess=guess)
    assert result.value == pytest.approx(2.35241226225174034, rel=1e-10)
    assert initial_guess(geom, guess).tau.imag > 0
