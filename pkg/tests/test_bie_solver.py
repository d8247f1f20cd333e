import logging
import math

import mpmath
import numpy as np
import numpy.testing as npt
import pytest

from condcap.common.constants import METHOD_TOLERANCES, REFERENCE_ROWS, get_bie_max_unknowns
from condcap.common.errors import ErrorCode, SolverError
from condcap.common.types import Contour, ContourKind, ContourSet, Method, SingularKind, Terminal
from condcap.geometry import build_contours, parse_spec
from condcap.solvers import (
    assemble,
    block_preconditioner,
    capacity_bie,
    capacity_matrix,
    discretize,
    normal_condition,
    solve_density,
)
from condcap.solvers.bie_solver import (
    BieSystem,
    CapacityMatrix,
    SingularTerm,
    _edge_points,
    _separation,
    check_supports,
    double_layer_constant,
    singular_terms,
    support_integrals,
    with_rhs,
)

BIE_ROWS = sorted(REFERENCE_ROWS)
SQUARE = [0j, 1 + 0j, 1 + 1j, 1j]


def _contours(row_id):
    return build_contours(parse_spec(REFERENCE_ROWS[row_id]["spec"]))


def test_circle_mesh_size():
    circle = Contour(ContourKind.CIRCLE, Terminal.OUTER, center=0j, radius=1.0)
    disc = discretize(ContourSet((circle,), True), level=1)
    mesh = disc.meshes[0]
    assert mesh.size == 128
    assert mesh.width == 2 * mesh.order - 1
    npt.assert_allclose(np.abs(mesh.nodes), 1.0, rtol=1e-15)
    assert disc.singular_terms == []


def test_negative_level():
    with pytest.raises(ValueError):
        discretize(_contours("E1"), level=-1)


def test_slot_sides_share_collocation_points():
    disc = discretize(_contours("A1"))
    for mesh in disc.meshes[1:]:
        assert mesh.size % 2 == 0
        paired = np.isfinite(mesh.mirror_t)
        assert paired.all()
        # the mirror parameter of a point on the reverse side lands on the same point
        half = mesh.size // 2
        npt.assert_allclose(mesh.colloc[:half], mesh.colloc[half:][::-1], atol=1e-12)


def test_refinement_doubles_the_steps():
    cset = _contours("F1")
    coarse, fine = discretize(cset, 1), discretize(cset, 2)
    for a, b in zip(coarse.meshes, fine.meshes):
        assert b.size == 2 * a.size


def test_double_layer_of_constant():
    values = double_layer_constant([0.5 + 0.5j, 2 + 2j, 0.5 + 0j], SQUARE, own=np.array([-1, -1, 0]))
    npt.assert_allclose(values, [1.0, 0.0, 0.5], atol=1e-14)


def test_double_layer_of_clockwise_walk_is_negative_inside():
    value = double_layer_constant([0.5 + 0.5j], SQUARE[::-1])
    npt.assert_allclose(value, [-1.0], atol=1e-14)


def test_slot_tips_are_cusps():
    terms = singular_terms(_contours("A1").contours[1], 1)
    assert [t.kind for t in terms] == [SingularKind.CUSP_TIP, SingularKind.CUSP_TIP]
    assert all(t.exponent == 0.5 for t in terms)


def test_rectangle_and_square_hole_corners():
    cset = _contours("F1")
    outer = singular_terms(cset.contours[0], 0)
    inner = singular_terms(cset.contours[1], 1)
    assert [t.angle for t in outer] == [0.5] * 4
    assert [t.angle for t in inner] == [1.5] * 4
    assert all(t.kind is SingularKind.CORNER for t in outer + inner)


def test_supports_shrink_with_level():
    contour = _contours("F1").contours[0]
    coarse = singular_terms(contour, 0, level=0)[0].support
    assert singular_terms(contour, 0, level=2)[0].support == pytest.approx(coarse / 4)


def test_overlapping_supports():
    terms = [
        SingularTerm(SingularKind.CORNER, 0, 0j, 0.5, 0.6),
        SingularTerm(SingularKind.CORNER, 0, 1 + 0j, 0.5, 0.6),
    ]
    with pytest.raises(SolverError) as info:
        check_supports(terms)
    assert info.value.code is ErrorCode.SINGULAR_OVERLAP
    check_supports(terms[:1])


def test_annulus_density_is_constant(annulus_spec):
    disc = discretize(build_contours(annulus_spec))
    system = assemble(disc)
    solution = solve_density(with_rhs(system, disc, {Terminal.OUTER: 0.0, Terminal.INNER: 1.0}))
    assert solution.residual < 1e-9
    assert abs(solution.charges[0] + solution.charges[1]) < 1e-9
    assert abs(solution.charges[1]) == pytest.approx(2.0 * math.pi / math.log(2.0), rel=1e-9)


def test_annulus_capacity_matrix(annulus_spec, annulus_capacity):
    matrix = capacity_matrix(annulus_spec, check_tol=1e-10)
    npt.assert_allclose(np.abs(matrix.entries), annulus_capacity, rtol=1e-9)
    assert matrix.deviation() < 1e-8
    assert matrix.capacity == pytest.approx(annulus_capacity, rel=1e-9)


def test_annulus_capacity(annulus_spec, annulus_capacity):
    result = capacity_bie(annulus_spec, tol=1e-8, keep_density=True)
    assert result.method is Method.BIE
    assert result.value == pytest.approx(annulus_capacity, rel=1e-9)
    assert result.diagnostics["converged"]
    assert result.diagnostics["scheme"] == "trig"
    inner = [abs(v) for contour, _, v in result.diagnostics["density"] if contour == 1]
    npt.assert_allclose(inner, 1.0 / math.log(2.0), rtol=1e-8)


def test_annulus_panels(annulus_spec, annulus_capacity):
    result = capacity_bie(annulus_spec, tol=5e-3, scheme="panel")
    assert result.diagnostics["scheme"] == "panel"
    assert result.value == pytest.approx(annulus_capacity, rel=2e-2)


def test_unknown_scheme(annulus_spec):
    with pytest.raises(ValueError):
        capacity_bie(annulus_spec, scheme="spline")
    with pytest.raises(ValueError):
        capacity_matrix(annulus_spec, scheme="auto")


def test_assembly_does_not_depend_on_threads():
    disc = discretize(_contours("E1"))
    one = assemble(disc, workers=1).matrix
    four = assemble(disc, workers=4).matrix
    npt.assert_array_equal(one, four)


@pytest.mark.slow
@pytest.mark.parametrize("row_id", BIE_ROWS)
def test_reference_rows(row_id):
    result = capacity_bie(_contours(row_id))
    expected = float(REFERENCE_ROWS[row_id]["expected"])
    assert result.value == pytest.approx(expected, rel=METHOD_TOLERANCES[Method.BIE])
    matrix = np.array(result.diagnostics["matrix"])
    assert abs(matrix[0, 1] - matrix[1, 0]) <= 1e-2 * expected


def test_symm_spectrum_on_the_unit_circle():
    circle = Contour(ContourKind.CIRCLE, Terminal.OUTER, center=0j, radius=1.0)
    disc = discretize(ContourSet((circle,), True))
    mesh = disc.meshes[0]
    matrix = assemble(disc).matrix
    for k in (1, 5, mesh.order - 1):
        npt.assert_allclose(matrix[:-1, k], -np.cos(k * mesh.t) / (2 * k), atol=1e-12)
        npt.assert_allclose(matrix[:-1, mesh.order - 1 + k], -np.sin(k * mesh.t) / (2 * k), atol=1e-12)


def test_annulus_of_log_ratio_one():
    spec = parse_spec(
        {
            "family": "EXPLICIT",
            "contours": [
                {"kind": "CIRCLE", "terminal": "OUTER", "center": [0, 0], "radius": math.e},
                {"kind": "CIRCLE", "terminal": "INNER", "center": [0, 0], "radius": 1},
            ],
        }
    )
    result = capacity_bie(spec, level=3)
    assert result.value == pytest.approx(2.0 * math.pi, rel=1e-4)


def test_condition_grows_quadratically(annulus_spec):
    cset = build_contours(annulus_spec)
    coarse = normal_condition(assemble(discretize(cset, 0)))
    fine = normal_condition(assemble(discretize(cset, 1)))
    assert math.log2(fine / coarse) == pytest.approx(2.0, abs=0.3)
    assert normal_condition(assemble(discretize(cset, 1)), preconditioned=True) < fine




def test_points_near_a_vertex_keep_their_offset():
    anchor, offset, _ = _edge_points(10 + 0j, 11 + 0j, np.array([0.5 / 512]), 6.0, 6.0)
    assert anchor[0] == 10
    assert offset[0] != 0
    # the plain sum rounds onto the vertex
    assert anchor[0] + offset[0] == 10
    gap = _separation(anchor, offset, np.array([10 + 0j]), np.array([0j]))
    assert abs(gap[0, 0]) == pytest.approx(abs(offset[0]), rel=1e-15)


def test_slot_tips_near_the_outer_wall_assemble_finite():
    spec = parse_spec(
        {
            "family": "EXPLICIT",
            "contours": [
                {"kind": "POLYLINE_CLOSED", "terminal": "OUTER", "vertices": [[0, -3], [11, -3], [11, 3], [0, 3]]},
                {"kind": "SLOT", "terminal": "INNER", "vertices": [[10, 0], [10.5, 0]]},
            ],
        }
    )
    system = assemble(discretize(build_contours(spec), level=3))
    assert np.isfinite(system.matrix).all()


def test_non_finite_entries_are_degenerate(monkeypatch, annulus_spec):
    disc = discretize(build_contours(annulus_spec))
    monkeypatch.setattr("condcap.solvers.bie_solver._symm_spectrum", lambda t, order: np.full((t.size, 2 * order - 1), np.nan))
    with pytest.raises(SolverError) as info:
        assemble(disc)
    assert info.value.code is ErrorCode.DEGENERATE


def test_dense_solve_failure_is_degenerate():
    matrix = np.array([[1.0, np.nan], [1.0, 1.0]])
    system = BieSystem(matrix, np.array([[1.0, 0.0]]), np.array([1.0, 0.0]), "panel")
    with pytest.raises(SolverError) as info:
        solve_density(system)
    assert info.value.code is ErrorCode.DEGENERATE


def test_tip_enrichments():
    tip = SingularTerm(SingularKind.CUSP_TIP, 0, 0j, 2.0, 0.1)
    items = tip.enrichments()
    assert [(e.profile, e.exponent) for e in items] == [("power", -0.5), ("log", 0.0), ("power", 0.0)]
    assert [e.signs for e in items] == [(1.0, 1.0), (1.0, -1.0), (1.0, -1.0)]
    # odd terms cancel between the two faces
    assert items[1].charge == 0.0
    assert items[2].charge == 0.0


def test_corner_enrichments_skip_integer_powers():
    reentrant = SingularTerm(SingularKind.CORNER, 0, 0j, 1.5, 0.1)
    npt.assert_allclose([e.exponent for e in reentrant.enrichments()], [-1.0 / 3.0, 1.0 / 3.0])
    assert SingularTerm(SingularKind.CORNER, 0, 0j, 0.5, 0.1).enrichments() == []


def test_singular_columns_per_contour():
    slots = discretize(_contours("A1"))
    assert slots.enrichment_columns(1).size == 6
    square = discretize(_contours("F1"))
    assert square.enrichment_columns(0).size == 0
    assert square.enrichment_columns(1).size == 8
    assert square.unknowns == sum(m.width for m in square.meshes) + 8 + 1


def test_singular_columns_carry_no_charge():
    disc = discretize(_contours("F1"))
    system = assemble(disc)
    columns = disc.enrichment_columns(1)
    npt.assert_array_equal(system.charges[:, columns], 0.0)
    npt.assert_array_equal(system.matrix[-1, columns], 0.0)
    assert np.abs(system.matrix[:-1, columns]).max() > 0


def _reference_integral(w, profile, gamma):
    def f(x):
        cutoff = 1 - 3 * x ** 2 + 2 * x ** 3
        weight = mpmath.log(x) if profile == "log" else x ** gamma
        return weight * cutoff * mpmath.log(abs(w - x))

    breaks = [0, 1] if w.imag or not 0 < w.real < 1 else [0, w.real, 1]
    return float(mpmath.quad(f, breaks))


@pytest.mark.parametrize("profile, gamma", [("power", -0.5), ("power", -1.0 / 3.0), ("power", 1.0 / 3.0), ("log", 0.0)])
@pytest.mark.parametrize("w", [0.4 + 0j, 0.4 + 0.05j, 1e-3 + 0j, -0.2 + 0j, 1.5 - 0.3j, 3 + 1j])
def test_support_integrals(w, profile, gamma):
    value = support_integrals(np.array([w]), profile, gamma)[0]
    assert value == pytest.approx(_reference_integral(w, profile, gamma), abs=1e-9)


def test_block_preconditioner_orthonormalizes_blocks():
    disc = discretize(_contours("F1"))
    system = assemble(disc)
    pre = block_preconditioner(system)
    product = pre.dense(system.matrix)
    start = 0
    for (rows, _), cols in zip(system.blocks, pre.columns):
        block = product[np.ix_(rows, np.arange(start, start + cols.size))]
        npt.assert_allclose(block.T @ block, np.eye(cols.size), atol=1e-8)
        start += cols.size
    assert normal_condition(system, preconditioned=True) < normal_condition(system)


def test_annulus_needs_few_iterations(annulus_spec):
    disc = discretize(build_contours(annulus_spec), level=1)
    solution = solve_density(with_rhs(assemble(disc), disc, {Terminal.OUTER: 0.0, Terminal.INNER: 1.0}))
    assert not solution.fallback
    assert 1 <= solution.iterations <= 5


@pytest.mark.slow
@pytest.mark.parametrize("row_id", ["A1", "C1", "D1", "E1", "F1", "G6"])
def test_preconditioned_iteration_counts(row_id):
    disc = discretize(_contours(row_id), level=2)
    system = assemble(disc)
    solution = solve_density(with_rhs(system, disc, {Terminal.OUTER: 0.0, Terminal.INNER: 1.0}))
    assert not solution.fallback
    assert solution.iterations <= 50


@pytest.mark.slow
@pytest.mark.parametrize("row_id", ["A4", "A5", "B5"])
def test_rows_with_tips_near_walls(row_id):
    result = capacity_bie(_contours(row_id))
    expected = float(REFERENCE_ROWS[row_id]["expected"])
    assert result.value == pytest.approx(expected, rel=METHOD_TOLERANCES[Method.BIE])


def test_fallback_is_logged_once(monkeypatch, caplog):
    monkeypatch.setattr("condcap.solvers.bie_solver.BIE_KRYLOV_MAXITER", 1)
    with caplog.at_level(logging.DEBUG, logger="condcap.bie"):
        matrix = capacity_matrix(_contours("F1"))
    assert all(s.fallback for s in matrix.solutions.values())
    warnings = [r for r in caplog.records if r.levelno == logging.WARNING and "dense least squares" in r.getMessage()]
    assert len(warnings) == 1


def test_strict_iteration_limit(monkeypatch):
    monkeypatch.setattr("condcap.solvers.bie_solver.BIE_KRYLOV_MAXITER", 1)
    with pytest.raises(SolverError) as info:
        capacity_matrix(_contours("F1"), strict=True)
    assert info.value.code is ErrorCode.ITERATION_LIMIT


def test_sweep_stops_at_the_unknown_cap():
    cset = _contours("F1")
    cap = discretize(cset, 1).unknowns
    result = capacity_bie(cset, tol=1e-14, scheme="trig", max_unknowns=cap)
    assert [entry[0] for entry in result.diagnostics["levels"]] == [0, 1]
    assert not result.diagnostics["converged"]


def test_unknown_cap_from_environment(monkeypatch):
    monkeypatch.setenv("CONDCAP_BIE_MAX_UNKNOWNS", "1234")
    assert get_bie_max_unknowns() == 1234


def test_consistency_check_uses_the_solver_tolerance(monkeypatch, annulus_spec):
    seen = []
    original = CapacityMatrix.check

    def record(self, tol):
        seen.append(tol)
        original(self, tol)

    monkeypatch.setattr(CapacityMatrix, "check", record)
    capacity_bie(annulus_spec, tol=1e-6)
    assert seen == [1e-6]


def test_density_includes_singular_part():
    result = capacity_bie(_contours("F1"), tol=1e-2, level=1, scheme="trig", keep_density=True)
    assert result.diagnostics["singular_columns"] == 8
    values = np.array([v for contour, _, v in result.diagnostics["density"] if contour == 1])
    assert np.isfinite(values).all()
