"""
harness/runner.py

Reference registry, table runs and cross-validation between methods.

Rows run concurrently on a bounded thread pool (CONDCAP_THREADS); reports list them
in registry order regardless of completion order.
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from toolz import dissoc, groupby

from ..common.constants import (
    METHOD_TOLERANCES,
    REFERENCE_ROWS,
    REGISTRY_CHECKSUM,
    TABLES,
    get_default_threads,
)
from ..common.errors import CondcapError, ErrorCode, HarnessError
from ..common.types import (
    CrossReport,
    CrossRow,
    Method,
    ReferenceRowConfig,
    RowReport,
    SolveOptions,
    TableReport,
)
from ..geometry.spec import CondenserSpec, parse_spec
from .dispatch import check_scope, compute

logger = logging.getLogger("condcap.runner")


@dataclass(frozen=True)
class ReferenceRow:
    id: str
    spec: CondenserSpec
    expected: float
    expected_text: str
    table: int

    @property
    def source(self) -> str:
        return f"Table {self.table}, row {self.id}"


def registry_checksum(rows: Mapping[str, ReferenceRowConfig]) -> str:
    """SHA-256 over the sorted ``id=expected`` lines."""
    text = "\n".join(f"{row_id}={rows[row_id]['expected']}" for row_id in sorted(rows))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_registry(
    rows: Mapping[str, ReferenceRowConfig] = REFERENCE_ROWS,
    checksum: str = REGISTRY_CHECKSUM,
) -> Dict[str, ReferenceRow]:
    """
    Parse the reference rows after verifying the pinned checksum of their expected values.

    Raises:
        HarnessError(CHECK_FAIL) when an expected value was edited.
    """
    actual = registry_checksum(rows)
    if actual != checksum:
        raise HarnessError(
            ErrorCode.CHECK_FAIL,
            "reference registry does not match its pinned checksum",
            {"expected": checksum, "actual": actual},
        )
    return {
        row_id: ReferenceRow(row_id, parse_spec(config["spec"]), float(config["expected"]), config["expected"], config["table"])
        for row_id, config in rows.items()
    }


def select_rows(registry: Mapping[str, ReferenceRow], selector: str) -> List[ReferenceRow]:
    """
    Rows for "all", a table number ("1".."4"), a family letter ("E") or a comma list of ids.

    Example:
        >>> [row.id for row in select_rows(load_registry(), "E")][:2]
        ['E1', 'E2']
    """
    selector = selector.strip()
    if selector.lower() == "all":
        return list(registry.values())
    if selector.isdigit():
        if int(selector) not in TABLES:
            raise HarnessError(ErrorCode.INVALID_DOCUMENT, f"no table {selector}", {"selector": selector})
        return [row for row in registry.values() if row.table == int(selector)]
    by_family = groupby(lambda row: row.spec.family.value, registry.values())
    if selector.upper() in by_family:
        return by_family[selector.upper()]
    ids = [part.strip().upper() for part in selector.split(",") if part.strip()]
    missing = [row_id for row_id in ids if row_id not in registry]
    if missing or not ids:
        raise HarnessError(ErrorCode.INVALID_DOCUMENT, f"unknown rows {missing or selector}", {"selector": selector})
    return [registry[row_id] for row_id in ids]


def _tolerance(method: Method, options: SolveOptions) -> float:
    return options.get("tol", METHOD_TOLERANCES[method])


def run_row(row: ReferenceRow, method: Method, options: Optional[SolveOptions] = None) -> RowReport:
    options = options or SolveOptions()
    tolerance = _tolerance(method, options)
    try:
        result = compute(row.spec, method, options)
    except CondcapError as exc:
        logger.warning(f"{row.id} ({method.value}) failed: {exc}")
        return RowReport(
            id=row.id,
            method=method.value,
            computed=None,
            expected=row.expected,
            rel_error=None,
            tolerance=tolerance,
            passed=False,
            error=exc.code.value,
        )
    rel_error = abs(result.value - row.expected) / row.expected
    logger.info(f"{row.id} ({method.value}): {result.value:.17g}, rel. error {rel_error:.2e}")
    return RowReport(
        id=row.id,
        method=method.value,
        computed=result.value,
        expected=row.expected,
        rel_error=rel_error,
        tolerance=tolerance,
        passed=rel_error <= tolerance,
        error=None,
    )


def _applicable(row: ReferenceRow, method: Method) -> bool:
    try:
        check_scope(row.spec, method)
    except HarnessError:
        return False
    return True


def _pool_map(fn, tasks: Sequence, workers: Optional[int]) -> List:
    with ThreadPoolExecutor(max_workers=workers or get_default_threads()) as pool:
        return list(pool.map(fn, tasks))


def run_table(
    selector: str = "all",
    methods: Iterable[Union[Method, str]] = (Method.BIE,),
    options: Optional[SolveOptions] = None,
    workers: Optional[int] = None,
) -> TableReport:
    """
    Compare selected reference rows with the given methods.

    Rows outside a method's scope (theta on anything but family E, SC on unbounded or
    multiply connected rows) are skipped and counted.

    Args:
        selector: "all", table number, family letter or comma list of row ids.
        methods: methods to run.
        options: forwarded to ``compute``; ``tol`` overrides the per-method tolerance.
        workers: thread pool bound.

    Returns:
        TableReport with one RowReport per (row, method), in registry order.
    """
    registry = load_registry()
    methods = [Method(m) for m in methods]
    rows = select_rows(registry, selector)
    tasks: List[Tuple[ReferenceRow, Method]] = [(row, m) for row in rows for m in methods if _applicable(row, m)]
    skipped = len(rows) * len(methods) - len(tasks)
    if skipped:
        logger.info(f"Skipping {skipped} row/method pairs outside method scope")
    reports = _pool_map(lambda task: run_row(task[0], task[1], options), tasks, workers)
    passed = sum(1 for r in reports if r["passed"])
    return TableReport(
        selector=selector,
        methods=[m.value for m in methods],
        rows=reports,
        passed=passed,
        failed=len(reports) - passed,
        skipped=skipped,
    )


def cross_validate(
    selector: str,
    method_a: Union[Method, str],
    method_b: Union[Method, str],
    options: Optional[SolveOptions] = None,
    workers: Optional[int] = None,
) -> CrossReport:
    """
    Pairwise relative differences |a - b| / |b| between two methods over selected rows.

    The combined tolerance is the looser of the two method tolerances.

    Raises:
        HarnessError(METHOD_SCOPE) if either method does not apply to a selected row.
    """
    method_a, method_b = Method(method_a), Method(method_b)
    rows = select_rows(load_registry(), selector)
    for row in rows:
        check_scope(row.spec, method_a)
        check_scope(row.spec, method_b)
    # each method runs at its own tolerance
    per_method = dissoc(dict(options or {}), "tol")

    def both(row: ReferenceRow) -> CrossRow:
        values, error = [], None
        for method in (method_a, method_b):
            try:
                values.append(compute(row.spec, method, SolveOptions(**per_method)).value)
            except CondcapError as exc:
                values.append(None)
                error = exc.code.value
        a, b = values
        rel_diff = abs(a - b) / abs(b) if a is not None and b is not None else None
        return CrossRow(id=row.id, value_a=a, value_b=b, rel_diff=rel_diff, error=error)

    results = _pool_map(both, rows, workers)
    tolerance = max(METHOD_TOLERANCES[method_a], METHOD_TOLERANCES[method_b])
    diffs = [r["rel_diff"] for r in results]
    max_diff = max((d for d in diffs if d is not None), default=None)
    passed = bool(results) and all(d is not None for d in diffs) and max_diff <= tolerance
    return CrossReport(
        method_a=method_a.value,
        method_b=method_b.value,
        rows=results,
        max_rel_diff=max_diff,
        tolerance=tolerance,
        passed=passed,
    )
