"""
harness/__init__.py

Dispatch, reference tables, reports and the command-line front end.
"""

from .dispatch import METHOD_FAMILIES, check_scope, compute
from .runner import ReferenceRow, cross_validate, load_registry, registry_checksum, run_table, select_rows

__all__ = [
    "METHOD_FAMILIES",
    "ReferenceRow",
    "check_scope",
    "compute",
    "cross_validate",
    "load_registry",
    "registry_checksum",
    "run_table",
    "select_rows",
]
