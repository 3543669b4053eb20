"""
Reporting package.

Writers for every artifact a run leaves in its output directory
(config echo, metrics CSV, postselection CSV, eval summary, JSON-lines step
log), the multi-run aggregate and the aligned text tables printed by the CLI.
"""

from .aggregate import aggregate_runs, write_aggregate
from .run_reporter import RunReporter
from .tables import format_aggregate_table, format_estimate_table, format_verify_table

__all__ = [
    "RunReporter",
    "aggregate_runs",
    "write_aggregate",
    "format_aggregate_table",
    "format_estimate_table",
    "format_verify_table",
]
