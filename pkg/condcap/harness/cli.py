"""
harness/cli.py

Command-line front end.

    condcap compute --spec FILE | --row ID  --method theta|sc|bie|fd [--tol R] [--level N] [--h STEP]
    condcap table --id 1|2|3|4|all|E|E1,E2 --method M[,M...] [--report FILE]
    condcap cross --rows E --a theta --b bie
    condcap oracle [--out FILE]

Exit codes: 0 success, 1 a table or cross check failed, 2 a condcap error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from ..common.constants import get_log_level
from ..common.errors import CondcapError, ErrorCode, HarnessError
from ..common.types import Method, SolveOptions
from ..geometry.spec import parse_spec
from .dispatch import compute
from .oracle import build_oracle
from .report import density_csv, render_cross, render_result, render_table, to_json
from .runner import cross_validate, load_registry, run_table

logger = logging.getLogger("condcap.cli")

METHODS = [m.value for m in Method]
FORMATS = ("json", "csv", "text")


def _methods(text: str) -> List[Method]:
    try:
        return [Method(part.strip().lower()) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"unknown method in {text!r}; choose from {METHODS}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="condcap", description="Capacities of symmetric polygonal condensers")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    cmd = sub.add_parser("compute", help="capacity of one condenser")
    source = cmd.add_mutually_exclusive_group(required=True)
    source.add_argument("--spec", type=Path, help="JSON spec document")
    source.add_argument("--row", help="reference row id, e.g. E1")
    cmd.add_argument("--method", choices=METHODS, required=True)
    cmd.add_argument("--tol", type=float, help="relative tolerance (per-method default)")
    cmd.add_argument("--level", type=int, default=0, help="first BIE level")
    cmd.add_argument("--scheme", choices=("auto", "trig", "panel"), default="auto", help="BIE scheme")
    cmd.add_argument("--h", type=float, help="FD grid step")
    cmd.add_argument("--strict", action="store_true", help="raise instead of flagging non-convergence")
    cmd.add_argument("--orientation-check", action="store_true", help="SC: compare with a coarse FD value")
    cmd.add_argument("--out", choices=FORMATS, default="text")
    cmd.add_argument("--dump-density", type=Path, help="BIE: write the Neumann data as CSV")

    cmd = sub.add_parser("table", help="compare reference rows")
    cmd.add_argument("--id", default="all", help="all, table number, family letter or row ids")
    cmd.add_argument("--method", type=_methods, default=[Method.BIE], help="comma list of methods")
    cmd.add_argument("--tol", type=float, help="override the per-method tolerance")
    cmd.add_argument("--out", choices=FORMATS, default="text")
    cmd.add_argument("--report", type=Path, help="also write the JSON report here")

    cmd = sub.add_parser("cross", help="cross-validate two methods")
    cmd.add_argument("--rows", required=True)
    cmd.add_argument("--a", choices=METHODS, required=True)
    cmd.add_argument("--b", choices=METHODS, required=True)
    cmd.add_argument("--out", choices=FORMATS, default="text")

    cmd = sub.add_parser("oracle", help="write extended-precision special-function values")
    cmd.add_argument("--out", type=Path, help="output file (stdout by default)")
    return parser


def _compute(args: argparse.Namespace) -> int:
    if args.row:
        registry = load_registry()
        if args.row.upper() not in registry:
            raise HarnessError(ErrorCode.INVALID_DOCUMENT, f"unknown row {args.row}", {"row": args.row})
        spec = registry[args.row.upper()].spec
    else:
        spec = parse_spec(args.spec.read_text())
    options = SolveOptions(
        level=args.level,
        scheme=args.scheme,
        strict=args.strict,
        orientation_check=args.orientation_check,
        keep_density=args.dump_density is not None,
    )
    if args.tol is not None:
        options["tol"] = args.tol
    if args.h is not None:
        options["h"] = args.h
    result = compute(spec, args.method, options)
    density = result.diagnostics.pop("density", None)
    if args.dump_density is not None and density is not None:
        args.dump_density.write_text(density_csv(density))
    sys.stdout.write(render_result(result, args.out))
    return 0


def _table(args: argparse.Namespace) -> int:
    options = SolveOptions(tol=args.tol) if args.tol is not None else SolveOptions()
    report = run_table(args.id, args.method, options)
    if args.report is not None:
        args.report.write_text(to_json(report))
    sys.stdout.write(render_table(report, args.out))
    return 0 if report["failed"] == 0 else 1


def _cross(args: argparse.Namespace) -> int:
    report = cross_validate(args.rows, args.a, args.b)
    sys.stdout.write(render_cross(report, args.out))
    return 0 if report["passed"] else 1


def _oracle(args: argparse.Namespace) -> int:
    text = to_json(build_oracle())
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"compute": _compute, "table": _table, "cross": _cross, "oracle": _oracle}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else get_log_level(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logger.debug(f"Running {args.command}")
    try:
        return COMMANDS[args.command](args)
    except CondcapError as exc:
        sys.stderr.write(f"condcap: {exc}\n")
        return 2
