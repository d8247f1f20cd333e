import json
import math

import pytest

from condcap.common.constants import REFERENCE_ROWS
from condcap.common.errors import ErrorCode, HarnessError, SolverError
from condcap.common.types import CapacityResult, Method, SolveOptions
from condcap.geometry import parse_spec
from condcap.harness import check_scope, compute, cross_validate, run_table, runner
from condcap.harness.cli import main
from condcap.harness.oracle import build_oracle
from condcap.harness.report import render_result, render_table, to_csv, to_json


def test_theta_through_dispatch():
    result = compute(REFERENCE_ROWS["E1"]["spec"], "theta")
    assert result.method is Method.THETA
    assert result.value == pytest.approx(1.56994325474948999, rel=1e-10)


@pytest.mark.parametrize(
    "row_id, method",
    [("A1", Method.THETA), ("E1", Method.SC), ("B1", Method.SC)],
)
def test_scope_rules(row_id, method):
    with pytest.raises(HarnessError) as info:
        check_scope(parse_spec(REFERENCE_ROWS[row_id]["spec"]), method)
    assert info.value.code is ErrorCode.METHOD_SCOPE


def test_explicit_spec_needs_two_plates_for_sc():
    spec = {
        "family": "EXPLICIT",
        "contours": [
            {"kind": "POLYLINE_CLOSED", "terminal": "OUTER", "vertices": [[-4, -3], [4, -3], [4, 3], [-4, 3]]},
            {"kind": "SLOT", "terminal": "INNER", "vertices": [[-3, 0], [-1, 0]]},
            {"kind": "SLOT", "terminal": "INNER", "vertices": [[1, 0], [3, 0]]},
        ],
    }
    with pytest.raises(HarnessError) as info:
        compute(spec, "sc")
    assert info.value.code is ErrorCode.METHOD_SCOPE


def test_explicit_square_in_rectangle_matches_family_f():
    spec = {
        "family": "EXPLICIT",
        "contours": [
            {"kind": "POLYLINE_CLOSED", "terminal": "OUTER", "vertices": [[-4, -3], [4, -3], [4, 3], [-4, 3]]},
            {"kind": "POLYLINE_CLOSED", "terminal": "INNER", "vertices": [[-1, -1], [1, -1], [1, 1], [-1, 1]]},
        ],
    }
    assert compute(spec, "sc").value == pytest.approx(float(REFERENCE_ROWS["F1"]["expected"]), rel=1e-6)


def test_solver_errors_name_the_method(monkeypatch, annulus_spec):
    monkeypatch.setenv("CONDCAP_FD_NODE_LIMIT", "10")
    with pytest.raises(SolverError) as info:
        compute(annulus_spec, Method.FD)
    assert info.value.code is ErrorCode.OOM_GUARD
    assert info.value.context["method"] == "fd"


def test_table_counts_out_of_scope_rows():
    report = run_table("3", ["theta"])
    assert report["skipped"] == 6
    assert report["passed"] == 6
    assert report["failed"] == 0
    assert [row["id"] for row in report["rows"]] == ["E1", "E2", "E3", "E4", "E5", "E6"]


def test_table_report_is_deterministic():
    first = to_json(run_table("E", [Method.THETA], workers=1))
    second = to_json(run_table("E", [Method.THETA], workers=4))
    assert first == second


def test_tolerance_override_fails_rows():
    report = run_table("E", ["theta"], SolveOptions(tol=1e-30))
    assert report["failed"] > 0
    assert all(row["tolerance"] == 1e-30 for row in report["rows"])


def test_table_survives_a_failing_row(monkeypatch):
    broken = parse_spec(REFERENCE_ROWS["E2"]["spec"])
    real = runner.compute

    def compute_or_fail(spec, method, options=None):
        if spec == broken:
            raise SolverError(ErrorCode.NOT_CONVERGED, "forced failure")
        return real(spec, method, options)

    monkeypatch.setattr(runner, "compute", compute_or_fail)
    report = run_table("E", ["theta"], workers=2)
    assert report["failed"] == 1
    assert report["passed"] == 5
    failed = [row for row in report["rows"] if not row["passed"]]
    assert [(row["id"], row["error"], row["computed"]) for row in failed] == [("E2", "NOT_CONVERGED", None)]


def test_cross_validate_rejects_out_of_scope():
    with pytest.raises(HarnessError) as info:
        cross_validate("A1", "theta", "bie")
    assert info.value.code is ErrorCode.METHOD_SCOPE


@pytest.mark.slow
@pytest.mark.parametrize("selector, method_a", [("E", "theta"), ("F", "sc"), ("G", "sc")])
def test_cross_validate_against_bie(selector, method_a):
    report = cross_validate(selector, method_a, "bie")
    assert report["passed"]
    assert report["max_rel_diff"] <= 5e-4


@pytest.mark.slow
def test_cross_validate_sc_against_fd():
    report = cross_validate("F", "sc", "fd")
    assert report["tolerance"] == 3e-2
    assert report["passed"]


def test_render_result_formats():
    result = CapacityResult(1.25, Method.BIE, float("nan"), {"levels": [[0, 95, 1.25]]})
    document = json.loads(render_result(result, "json"))
    assert document["value"] == 1.25
    assert document["rel_err_estimate"] is None
    assert render_result(result, "csv") == "method,value,rel_err_estimate\nbie,1.25,nan\n"
    assert render_result(result, "text").splitlines()[0].split() == ["method", "value", "rel_err_estimate"]


def test_numbers_use_seventeen_digits():
    assert to_csv(("x",), [(math.pi,)]) == "x\n3.1415926535897931\n"


def test_render_table_summary():
    report = run_table("E1", ["theta"])
    text = render_table(report)
    assert text.splitlines()[-1] == "passed 1, failed 0, skipped 0"
    assert "E1" in text


def test_cli_compute_json(capsys):
    assert main(["compute", "--row", "E1", "--method", "theta", "--out", "json"]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["method"] == "theta"
    assert document["value"] == pytest.approx(1.56994325474948999, rel=1e-10)


def test_cli_compute_from_spec_file(tmp_path, capsys):
    path = tmp_path / "e2.json"
    path.write_text(json.dumps(REFERENCE_ROWS["E2"]["spec"]))
    assert main(["compute", "--spec", str(path), "--method", "theta", "--out", "csv"]) == 0
    assert capsys.readouterr().out.startswith("method,value,rel_err_estimate\ntheta,1.873066996548")


def test_cli_dumps_density(tmp_path, annulus_spec, capsys):
    spec_path = tmp_path / "annulus.json"
    spec_path.write_text(json.dumps(annulus_spec.to_document()))
    density = tmp_path / "density.csv"
    assert main(["compute", "--spec", str(spec_path), "--method", "bie", "--dump-density", str(density)]) == 0
    lines = density.read_text().splitlines()
    assert lines[0] == "contour,t,dudn"
    assert len(lines) > 100
    capsys.readouterr()


@pytest.mark.parametrize(
    "argv",
    [
        ["compute", "--row", "A1", "--method", "theta"],
        ["compute", "--row", "Z1", "--method", "theta"],
        ["table", "--id", "Z9", "--method", "theta"],
    ],
)
def test_cli_errors_exit_two(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err.startswith("condcap: ")


def test_cli_table_exit_codes(capsys):
    assert main(["table", "--id", "E", "--method", "theta"]) == 0
    assert "passed 6, failed 0, skipped 0" in capsys.readouterr().out
    assert main(["table", "--id", "E", "--method", "theta", "--tol", "1e-30"]) == 1


def test_cli_table_report_file(tmp_path, capsys):
    report = tmp_path / "report.json"
    assert main(["table", "--id", "E1,E2", "--method", "theta", "--out", "csv", "--report", str(report)]) == 0
    document = json.loads(report.read_text())
    assert document["passed"] == 2
    assert capsys.readouterr().out.splitlines()[0] == "id,method,computed,expected,rel_error,tolerance,status"


def test_oracle_document(tmp_path):
    document = build_oracle()
    assert document["version"] == 1
    assert document["dps"] == 34
    assert len(document["theta1"]) == 6
    assert all(len(entry["values"]) == 3 for entry in document["theta1"])
    path = tmp_path / "oracle.json"
    assert main(["oracle", "--out", str(path)]) == 0
    assert json.loads(path.read_text()) == json.loads(to_json(document))
