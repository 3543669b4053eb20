"""
`resources` subcommand: cost one instance on fault-tolerant hardware.

Prints the ResourceEstimate as an aligned table followed by its JSON
document (format "quixer-resources/1").

Usage:
    python main.py resources -q 6 -n 32 -l 4 -d 3 --ancilla-select
"""

from typing import Optional

from app.commands.exit_codes import EXIT_OK, report_failure
from app.schemas import ResourceQuery
from backend.resources.estimator import estimate
from services.reporting import format_estimate_table


def cmd_resources(
    q: int,
    n: int,
    l: int,
    d: int,
    ancilla_select: bool = False,
    g_override: Optional[int] = None,
    prep_gates: Optional[int] = None,
    ancilla_select_multiplier: int = 1,
) -> int:
    """Invalid values (n < 2, non-positive q, l or d) exit with EXIT_USAGE."""
    try:
        query = ResourceQuery(
            q=q,
            n=n,
            l=l,
            d=d,
            g_override=g_override,
            use_ancilla_select=ancilla_select,
            ancilla_select_multiplier=ancilla_select_multiplier,
            prep_gates_override=prep_gates,
        )
        result = estimate(query)
    except Exception as e:
        return report_failure("resources", e)

    print(format_estimate_table(result))
    print()
    print(result.model_dump_json(indent=2))
    return EXIT_OK
