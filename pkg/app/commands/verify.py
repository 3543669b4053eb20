"""
`verify` subcommand: run the property suites and print one line per property.

Usage:
    python main.py verify --scale small
"""

import logging

from app.commands.exit_codes import EXIT_NUMERIC, EXIT_OK, report_failure
from backend.verification.suites import Scale, run_suites
from services.reporting import format_verify_table


logger = logging.getLogger(__name__)


def cmd_verify(scale: str = Scale.SMALL.value, seed: int = 0) -> int:
    """Exit 0 when every property passes, EXIT_NUMERIC otherwise."""
    try:
        results = run_suites(Scale(scale), seed=seed)
    except Exception as e:
        return report_failure("verify", e)

    print(format_verify_table(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"[VERIFY] failed properties: {', '.join(failed)}")
        return EXIT_NUMERIC
    return EXIT_OK
