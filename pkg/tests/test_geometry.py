import pytest

from condcap.common.constants import REFERENCE_ROWS
from condcap.common.errors import ErrorCode, GeometryError
from condcap.common.types import ArcLabel, ContourKind, Family, Terminal
from condcap.geometry import (
    build_contours,
    half_domain,
    is_mirror_symmetric,
    min_feature_size,
    parse_spec,
    reflect_half_domain,
    same_segments,
)
from condcap.geometry.half_domain import vertex_angle


def test_parse_spec_aliases_and_shift():
    spec = parse_spec({"family": "e", "X": [1, 6], "Y": [1, 2]})
    assert spec.family is Family.E
    assert spec.x == (0.0, 5.0)
    assert spec.y == (1.0, 2.0)


def test_parse_spec_from_json_text():
    spec = parse_spec('{"family": "F", "L1": [3, 4], "L2": [1, 1]}')
    assert spec.l1 == (3.0, 4.0)
    assert spec.l2 == (1.0, 1.0)


@pytest.mark.parametrize(
    "document, code",
    [
        ({"family": "E", "x": [5, 0], "y": [1, 2]}, ErrorCode.NON_MONOTONE_X),
        ({"family": "E", "x": [0, 5], "y": [1, -2]}, ErrorCode.NONPOSITIVE_LENGTH),
        ({"family": "A", "x": [0, 1, 2, 3, 4, 5, 6], "l": [2]}, ErrorCode.BAD_ARITY),
        ({"family": "F", "x": [0, 1], "l1": [3, 4], "l2": [1, 1]}, ErrorCode.BAD_ARITY),
        ({"family": "F", "l1": [3, 4, 1], "l2": [1, 1]}, ErrorCode.BAD_ARITY),
        ({"family": "EXPLICIT"}, ErrorCode.BAD_ARITY),
        ({"family": "Q", "x": [0, 1]}, ErrorCode.INVALID_DOCUMENT),
    ],
)
def test_parse_spec_rejects(document, code):
    with pytest.raises(GeometryError) as info:
        parse_spec(document)
    assert info.value.code is code


def test_parse_spec_rejects_broken_json():
    with pytest.raises(GeometryError) as info:
        parse_spec('{"family": "E", "x": [0, 5')
    assert info.value.code is ErrorCode.INVALID_DOCUMENT


def test_scaled_multiplies_every_length():
    spec = parse_spec(REFERENCE_ROWS["B1"]["spec"]).scaled(2.0)
    assert spec.x == (0, 2, 4, 6, 10, 12, 14, 16)
    assert spec.y == (4, 2)
    assert spec.l == (6,)


def test_slot_pair_contours():
    cset = build_contours(parse_spec(REFERENCE_ROWS["E1"]["spec"]))
    assert not cset.bounded
    assert [c.vertices for c in cset.contours] == [(-1j, 1j), (5 - 2j, 5 + 2j)]
    assert [c.terminal for c in cset.contours] == [Terminal.OUTER, Terminal.INNER]
    assert all(c.orientation == -1 for c in cset.contours)


def test_slots_in_rectangle():
    cset = build_contours(parse_spec(REFERENCE_ROWS["A1"]["spec"]))
    assert cset.bounded
    outer = cset.by_terminal(Terminal.OUTER)
    assert len(outer) == 1 and outer[0].orientation == 1
    slots = cset.by_terminal(Terminal.INNER)
    assert [c.kind for c in slots] == [ContourKind.SLOT] * 3
    assert slots[0].vertices == (1 + 0j, 3 + 0j)


@pytest.mark.parametrize("row_id", sorted(REFERENCE_ROWS))
def test_reference_rows_decode_symmetric(row_id):
    cset = build_contours(parse_spec(REFERENCE_ROWS[row_id]["spec"]))
    assert is_mirror_symmetric(cset)
    assert min_feature_size(cset) > 0


def test_ambiguous_stepped_chain():
    document = {"family": "C", "x": [0, 1, 2, 3, 5, 6, 7, 8], "y": [2], "l": [3, 9, 1]}
    with pytest.raises(GeometryError) as info:
        build_contours(parse_spec(document))
    assert info.value.code is ErrorCode.DECODE_AMBIGUOUS


def test_slit_above_wall_is_ambiguous():
    document = {"family": "B", "x": [0, 1, 2, 3, 5, 6, 7, 8], "y": [4, 1], "l": [3]}
    with pytest.raises(GeometryError) as info:
        build_contours(parse_spec(document))
    assert info.value.code is ErrorCode.DECODE_AMBIGUOUS


def test_crossing_explicit_contours():
    document = {
        "family": "EXPLICIT",
        "contours": [
            {"kind": "POLYLINE_CLOSED", "terminal": "OUTER", "vertices": [[-2, -2], [2, -2], [2, 2], [-2, 2]]},
            {"kind": "SLOT", "terminal": "INNER", "vertices": [[1, 0], [3, 0]]},
        ],
    }
    with pytest.raises(GeometryError) as info:
        build_contours(parse_spec(document))
    assert info.value.code is ErrorCode.SELF_INTERSECTION


def test_asymmetric_condenser_has_no_half_domain():
    document = {
        "family": "EXPLICIT",
        "contours": [
            {"kind": "POLYLINE_CLOSED", "terminal": "OUTER", "vertices": [[-2, -2], [2, -2], [2, 3], [-2, 3]]},
            {"kind": "SLOT", "terminal": "INNER", "vertices": [[-1, 0], [1, 0]]},
        ],
    }
    with pytest.raises(GeometryError) as info:
        half_domain(build_contours(parse_spec(document)))
    assert info.value.code is ErrorCode.NOT_SYMMETRIC


def test_half_domain_of_square_in_rectangle():
    cset = build_contours(parse_spec(REFERENCE_ROWS["F1"]["spec"]))
    poly = half_domain(cset)
    assert poly.bounded
    assert poly.size == 8
    assert sum(poly.angles) == pytest.approx(6.0)
    assert len(poly.arcs_with(ArcLabel.F0)) == 1
    assert len(poly.arcs_with(ArcLabel.F1)) == 1
    assert len(poly.arcs_with(ArcLabel.N)) == 2
    assert same_segments(reflect_half_domain(poly), [e for c in cset.contours for e in c.edges()])


def test_half_domain_of_slot_pair_reaches_infinity():
    poly = half_domain(build_contours(parse_spec(REFERENCE_ROWS["E1"]["spec"])))
    assert not poly.bounded
    assert -1.0 in poly.angles


@pytest.mark.parametrize(
    "d_in, d_out, angle",
    [(1, 1j, 0.5), (1, -1j, 1.5), (1, 1, 1.0), (1, -1, 2.0)],
)
def test_vertex_angle(d_in, d_out, angle):
    assert vertex_angle(d_in, d_out) == angle


@pytest.mark.parametrize("row_id", ["A1", "G1", "G6"])
def test_half_domain_reflects_back_to_the_condenser(row_id):
    cset = build_contours(parse_spec(REFERENCE_ROWS[row_id]["spec"]))
    poly = half_domain(cset)
    assert same_segments(reflect_half_domain(poly), [e for c in cset.contours for e in c.edges()])


def test_shifted_abscissae_give_the_same_contours():
    document = dict(REFERENCE_ROWS["A1"]["spec"])
    moved = dict(document, x=[v + 2.5 for v in document["x"]])
    assert parse_spec(moved) == parse_spec(document)
    assert build_contours(parse_spec(moved)) == build_contours(parse_spec(document))
