import logging

import numpy as np
import pytest

from condcap.common.constants import METHOD_TOLERANCES, REFERENCE_ROWS
from condcap.common.errors import ErrorCode, SolverError
from condcap.common.types import Method, NodeClass
from condcap.geometry import build_contours, parse_spec
from condcap.solvers import capacity_fd, fd_levels
from condcap.solvers.fd_oracle import box_bias, build_grid, default_step, grid_layout, solve_box, solve_grid

FD_ROWS = ["A1", "B2", "C1", "D1", "E1", "F1", "G1"]
E_TOLERANCE = 5e-2


def test_annulus_grid_classes(annulus_spec):
    grid = build_grid(build_contours(annulus_spec), 0.25)
    xs, ys = grid.coordinates()
    center = np.unravel_index(np.argmin(np.abs(xs) + np.abs(ys)), grid.shape)
    assert grid.classes[center] == NodeClass.PLATE1.value
    assert grid.classes[0, 0] == NodeClass.EXTERIOR.value
    assert (grid.classes == NodeClass.INTERIOR.value).any()
    assert (grid.classes == NodeClass.PLATE0.value).any()


def test_harmonic_grid_function_obeys_maximum_principle(annulus_spec):
    grid = build_grid(build_contours(annulus_spec), 0.125)
    u, energy, iterations = solve_grid(grid)
    assert u.min() >= -1e-12 and u.max() <= 1.0 + 1e-12
    assert energy > 0
    assert iterations > 0


def test_annulus_capacity(annulus_spec, annulus_capacity):
    result = capacity_fd(annulus_spec)
    assert result.method is Method.FD
    assert result.value == pytest.approx(annulus_capacity, rel=2e-2)
    assert result.diagnostics["max_principle"]
    assert len(result.diagnostics["levels"]) >= 2


def test_default_step_is_a_quarter_feature():
    cset = build_contours(parse_spec(REFERENCE_ROWS["F1"]["spec"]))
    assert default_step(cset) == pytest.approx(0.25)


def test_grid_layout_covers_the_box():
    cset = build_contours(parse_spec(REFERENCE_ROWS["E1"]["spec"]))
    x0, y0, nx, ny = grid_layout(cset, 0.5, box_factor=2.0)
    assert x0 <= 2.5 - 2.0 * 5.0
    assert x0 + 0.5 * (nx - 1) >= 2.5 + 2.0 * 5.0
    assert y0 <= -10.0


def test_levels_approach_from_one_side(annulus_spec):
    levels = fd_levels(annulus_spec, h=0.25, levels=3)
    assert [h for h, _ in levels] == [0.25, 0.125, 0.0625]
    assert all(c > 0 for _, c in levels)


def test_node_limit(monkeypatch, annulus_spec):
    monkeypatch.setenv("CONDCAP_FD_NODE_LIMIT", "100")
    with pytest.raises(SolverError) as info:
        capacity_fd(annulus_spec, h=0.05)
    assert info.value.code is ErrorCode.OOM_GUARD


@pytest.mark.slow
@pytest.mark.parametrize("row_id", FD_ROWS)
def test_reference_rows(row_id):
    spec = parse_spec(REFERENCE_ROWS[row_id]["spec"])
    result = capacity_fd(spec)
    tolerance = E_TOLERANCE if row_id[0] == "E" else METHOD_TOLERANCES[Method.FD]
    assert result.value == pytest.approx(float(REFERENCE_ROWS[row_id]["expected"]), rel=tolerance)
    if row_id[0] == "E":
        assert result.diagnostics["box_bias"] < 1e-2


def _slot_pair():
    return build_contours(parse_spec(REFERENCE_ROWS["E1"]["spec"]))


def test_unbounded_grid_is_walled(annulus_spec):
    grid = build_grid(_slot_pair(), 0.5, box_factor=2.0)
    wall = NodeClass.WALL.value
    assert (grid.classes[0, :] == wall).all() and (grid.classes[:, -1] == wall).all()
    assert not (grid.classes[1:-1, 1:-1] == wall).any()
    assert grid.walled
    assert not build_grid(build_contours(annulus_spec), 0.25).walled


def test_floating_walls_minimize_the_energy():
    grid = build_grid(_slot_pair(), 0.5, box_factor=3.0)
    u, energy, _, potential = solve_box(grid)
    assert 0.0 < potential < 1.0
    assert u.min() >= -1e-12 and u.max() <= 1.0 + 1e-12
    grounded = solve_box(grid, 0.0)
    assert grounded[3] == 0.0
    assert grounded[1] >= energy
    assert solve_grid(grid)[1] == pytest.approx(grounded[1], rel=1e-12)


def test_slot_pair_reports_box_bias():
    result = capacity_fd(_slot_pair(), h=0.5, box_factor=3.0, max_halvings=1)
    assert 0.0 < result.diagnostics["wall_potential"] < 1.0
    assert result.diagnostics["box_bias"] >= 0.0
    assert "box_bias" not in capacity_fd(parse_spec(REFERENCE_ROWS["F1"]["spec"]), h=0.5, max_halvings=1).diagnostics


def test_large_box_bias_is_logged(monkeypatch, caplog):
    monkeypatch.setattr("condcap.solvers.fd_oracle.FD_BOX_BIAS_RTOL", 0.0)
    grid = build_grid(_slot_pair(), 0.5, box_factor=2.0)
    value = solve_box(grid)[1]
    with caplog.at_level(logging.WARNING, logger="condcap.fd"):
        bias = box_bias(_slot_pair(), 0.5, value, box_factor=2.0)
    assert bias >= 0.0
    assert any("Box truncation" in r.getMessage() for r in caplog.records)


def test_box_bias_skipped_beyond_the_node_limit(monkeypatch):
    grid = build_grid(_slot_pair(), 0.5, box_factor=2.0)
    value = solve_box(grid)[1]
    monkeypatch.setenv("CONDCAP_FD_NODE_LIMIT", str(grid.nodes + 1))
    assert box_bias(_slot_pair(), 0.5, value, box_factor=2.0) is None
