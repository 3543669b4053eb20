"""
`aggregate` subcommand: mean and spread over several finished runs.

Reads metrics.csv (and eval-test.json when present) from each run directory,
prints one line per run and the mean +/- std lines, then the
"quixer-aggregate/1" JSON document. With --output the document is also
written to that path.

Usage:
    python main.py aggregate runs/seed0 runs/seed1 runs/seed2 --output runs/aggregate.json
"""

import logging
from typing import Optional, Sequence

from app.commands.exit_codes import EXIT_OK, report_failure
from services.reporting import aggregate_runs, format_aggregate_table, write_aggregate


logger = logging.getLogger(__name__)


def cmd_aggregate(run_dirs: Sequence[str], output_path: Optional[str] = None) -> int:
    """Missing or empty run directories exit with EXIT_DATA."""
    try:
        report = aggregate_runs(list(run_dirs))
        if output_path is not None:
            write_aggregate(report, output_path)
            logger.info(f"[AGGREGATE] wrote {output_path}")
    except Exception as e:
        return report_failure("aggregate", e)

    print(format_aggregate_table(report))
    print()
    print(report.model_dump_json(indent=2))
    return EXIT_OK
