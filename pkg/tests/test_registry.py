import pytest
from toolz import assoc, assoc_in

from condcap.common.constants import REFERENCE_ROWS, REGISTRY_CHECKSUM, TABLES
from condcap.common.errors import ErrorCode, HarnessError
from condcap.common.types import Family
from condcap.harness import load_registry, registry_checksum, select_rows


def test_pinned_checksum():
    assert registry_checksum(REFERENCE_ROWS) == REGISTRY_CHECKSUM


def test_registry_has_every_table_row(registry):
    assert len(registry) == 42
    for table, families in TABLES.items():
        rows = [row for row in registry.values() if row.table == table]
        assert {row.spec.family.value for row in rows} == set(families)
        assert len(rows) == 6 * len(families)


def test_edited_expected_value_is_rejected():
    tampered = assoc(REFERENCE_ROWS, "E1", assoc_in(REFERENCE_ROWS["E1"], ["expected"], "1.56994325474948998"))
    with pytest.raises(HarnessError) as info:
        load_registry(tampered)
    assert info.value.code is ErrorCode.CHECK_FAIL


def test_rows_keep_their_decimal_text(registry):
    row = registry["F1"]
    assert row.expected_text == "5.6327570222823258486"
    assert row.expected == pytest.approx(5.6327570222823258)
    assert row.spec.family is Family.F
    assert row.source == "Table 4, row F1"


@pytest.mark.parametrize(
    "selector, ids",
    [
        ("E", ["E1", "E2", "E3", "E4", "E5", "E6"]),
        ("e2, F3", ["E2", "F3"]),
        ("2", ["C1", "C2", "C3", "C4", "C5", "C6"]),
    ],
)
def test_select_rows(registry, selector, ids):
    assert [row.id for row in select_rows(registry, selector)] == ids


def test_select_all_and_by_table(registry):
    assert len(select_rows(registry, "all")) == 42
    assert {row.spec.family for row in select_rows(registry, "3")} == {Family.D, Family.E}


@pytest.mark.parametrize("selector", ["9", "Z9", "E1,E9", ","])
def test_select_rows_rejects_unknown(registry, selector):
    with pytest.raises(HarnessError) as info:
        select_rows(registry, selector)
    assert info.value.code is ErrorCode.INVALID_DOCUMENT
