"""
harness/report.py

Machine-readable (JSON, CSV) and aligned-text renderings of results and reports.
Numbers are written with 17 significant digits; non-finite values become null.
Nothing time-dependent goes into the output, so serial runs are byte-identical.
"""

import csv
import io
import json
import math
from typing import Any, Dict, Iterable, List, Sequence, Tuple

from toolz import merge

from ..common.types import CapacityResult, CrossReport, TableReport

NUMBER_FORMAT = ".17g"


def _clean(value: Any) -> Any:
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return [_clean(value.real), _clean(value.imag)]
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item"):
        return _clean(value.item())
    return value


def _number(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, NUMBER_FORMAT)
    return str(value)


def to_json(document: Any) -> str:
    """JSON with sorted keys; floats use their shortest round-trip form (at most 17 digits)."""
    return json.dumps(_clean(document), sort_keys=True, indent=2) + "\n"


def result_document(result: CapacityResult, **extra: Any) -> Dict[str, Any]:
    return merge(
        {
            "value": result.value,
            "method": result.method.value,
            "rel_err_estimate": result.rel_err_estimate,
            "diagnostics": result.diagnostics,
        },
        extra,
    )


def to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_number(v) for v in row])
    return buffer.getvalue()


def aligned(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    cells = [list(header)] + [[_number(v) for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


RESULT_HEADER = ("method", "value", "rel_err_estimate")
TABLE_HEADER = ("id", "method", "computed", "expected", "rel_error", "tolerance", "status")
CROSS_HEADER = ("id", "value_a", "value_b", "rel_diff", "error")
DENSITY_HEADER = ("contour", "t", "dudn")


def _result_rows(result: CapacityResult) -> List[Tuple[Any, ...]]:
    return [(result.method.value, result.value, result.rel_err_estimate)]


def render_result(result: CapacityResult, fmt: str) -> str:
    if fmt == "json":
        return to_json(result_document(result))
    if fmt == "csv":
        return to_csv(RESULT_HEADER, _result_rows(result))
    return aligned(RESULT_HEADER, _result_rows(result))


def _status(row: Dict[str, Any]) -> str:
    if row["error"]:
        return f"FAIL ({row['error']})"
    return "pass" if row["passed"] else "FAIL"


def _table_rows(report: TableReport) -> List[Tuple[Any, ...]]:
    return [
        (r["id"], r["method"], r["computed"], r["expected"], r["rel_error"], r["tolerance"], _status(r))
        for r in report["rows"]
    ]


def render_table(report: TableReport, fmt: str = "text") -> str:
    """
    Table report as JSON, CSV or aligned text with a summary line.

    Example:
        >>> report = {"selector": "E1", "methods": ["theta"], "passed": 1, "failed": 0, "skipped": 0,
        ...           "rows": [{"id": "E1", "method": "theta", "computed": 1.5, "expected": 1.5,
        ...                     "rel_error": 0.0, "tolerance": 1e-10, "passed": True, "error": None}]}
        >>> render_table(report).splitlines()[-1]
        'passed 1, failed 0, skipped 0'
    """
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(TABLE_HEADER, _table_rows(report))
    summary = f"passed {report['passed']}, failed {report['failed']}, skipped {report['skipped']}"
    return aligned(TABLE_HEADER, _table_rows(report)) + summary + "\n"


def render_cross(report: CrossReport, fmt: str = "text") -> str:
    if fmt == "json":
        return to_json(report)
    rows = [(r["id"], r["value_a"], r["value_b"], r["rel_diff"], r["error"] or "") for r in report["rows"]]
    if fmt == "csv":
        return to_csv(CROSS_HEADER, rows)
    verdict = "pass" if report["passed"] else "FAIL"
    summary = (
        f"{report['method_a']} vs {report['method_b']}: max rel. diff "
        f"{_number(report['max_rel_diff']) or 'n/a'} (tolerance {_number(report['tolerance'])}) {verdict}"
    )
    return aligned(CROSS_HEADER, rows) + summary + "\n"


def density_csv(rows: Iterable[Tuple[int, float, float]]) -> str:
    return to_csv(DENSITY_HEADER, rows)
