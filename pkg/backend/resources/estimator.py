"""
Fault-tolerant resource estimator.

Counts qubits and gates for one hardware run of a Quixer instance in the
gate set {single-qubit, controlled single-qubit / CX, Toffoli}.

Qubits: q data + m = ceil(log2 n) control + 3 ancillae (QSVT signal
qubit, parity-combination qubit, projector qubit), plus m - 2 ladder
ancillae when the ancilla-assisted select is used.

Gates:
    select (naive)     d * n * g * mcg(m)      every gate of every token
                                               controlled on all m qubits
    select (ancilla)   d * n * (g * k + 2(m-1)) one Toffoli ladder per token,
                                               k = configurable multiplier
    projectors         d * mcg(m)
    prep               2 * d * override, or "unsupplied"

where g is the per-token gate count (4lq circuit-14 gates + 1 phase gate
by default) and mcg(m) = 2(m-1) + 1 is the Toffoli-ladder cost of a gate
controlled on m qubits (1 for m = 1).
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Tuple

from app.schemas import ResourceEstimate, ResourceQuery
from backend.quantum.qsvt import BLOCK_ENCODING, BLOCK_ENCODING_ADJOINT, PROJECTOR_PHASE, qsvt_sequence_template


logger = logging.getLogger(__name__)

UNSUPPLIED = "unsupplied"
QSVT_ANCILLAE = 3


class ResourceError(Exception):
    """Raised when a resource query is invalid."""
    pass


@dataclass(frozen=True)
class LadderGate:
    """One gate of a Toffoli ladder."""
    kind: str
    controls: Tuple[str, ...]
    target: str


def control_qubits(n: int) -> int:
    """m = ceil(log2 n)."""
    if n < 2:
        raise ResourceError(f"n must be >= 2, got {n}")
    return (n - 1).bit_length()


def qubit_count(query: ResourceQuery) -> int:
    """
    q + ceil(log2 n) + 3, plus max(ceil(log2 n) - 2, 0) ladder ancillae
    when the ancilla-assisted select is enabled.
    """
    m = control_qubits(query.n)
    total = query.q + m + QSVT_ANCILLAE
    if query.use_ancilla_select:
        total += max(m - 2, 0)
    return total


def multicontrolled_gate_count(m: int) -> int:
    """
    Gates for a single-qubit unitary controlled on m qubits.

    Raises:
        ResourceError: If m < 1
    """
    if m < 1:
        raise ResourceError(f"control count must be >= 1, got {m}")
    if m == 1:
        return 1
    return 2 * (m - 1) + 1


def toffoli_ladder(m: int) -> List[LadderGate]:
    """
    Explicit ladder for a gate controlled on m qubits c0..c{m-1}.

    Computes the AND of all controls into ancillae a0..a{m-2} with m - 1
    Toffolis, applies the controlled unitary from the last ancilla to the
    target t, then uncomputes the ladder in reverse order.

    Raises:
        ResourceError: If m < 1
    """
    if m < 1:
        raise ResourceError(f"control count must be >= 1, got {m}")
    if m == 1:
        return [LadderGate("CU", ("c0",), "t")]

    compute = [LadderGate("TOFFOLI", ("c0", "c1"), "a0")]
    for i in range(2, m):
        compute.append(LadderGate("TOFFOLI", (f"c{i}", f"a{i - 2}"), f"a{i - 1}"))
    apply = LadderGate("CU", (f"a{m - 2}",), "t")
    return compute + [apply] + list(reversed(compute))


def default_gates_per_token(q: int, l: int) -> int:
    """4lq circuit-14 gates plus one phase gate."""
    return 4 * l * q + 1


def estimate(query: ResourceQuery) -> ResourceEstimate:
    """
    Concrete qubit and gate totals.

    Returns:
        ResourceEstimate: Every count field plus the asymptotic class
    """
    m = control_qubits(query.n)
    g = query.g_override if query.g_override is not None else default_gates_per_token(query.q, query.l)
    mcg = multicontrolled_gate_count(m)

    template = qsvt_sequence_template(query.d)
    applications = sum(1 for s in template if s.kind in (BLOCK_ENCODING, BLOCK_ENCODING_ADJOINT))
    projectors = sum(1 for s in template if s.kind == PROJECTOR_PHASE)

    notes = [
        "gate set: single-qubit, controlled single-qubit/CX, Toffoli",
    ]
    if query.use_ancilla_select:
        per_application = query.n * (g * query.ancilla_select_multiplier + 2 * (m - 1))
        asymptotic = "O(d n g)"
        notes.append(
            f"ancilla select: one {2 * (m - 1)}-Toffoli ladder per token, then g singly "
            f"controlled gates x multiplier {query.ancilla_select_multiplier} (constant not "
            f"fixed by the O(g) bound)"
        )
    else:
        per_application = query.n * g * mcg
        asymptotic = "O(d n g log2 n)"

    gates_select = applications * per_application
    gates_projectors = projectors * mcg
    gates_total = gates_select + gates_projectors

    if query.prep_gates_override is not None:
        gates_prep = 2 * applications * query.prep_gates_override
        gates_total += gates_prep
    else:
        gates_prep = UNSUPPLIED
        notes.append("U_PREP cost unsupplied; gates_total excludes it")

    result = ResourceEstimate(
        q=query.q,
        n=query.n,
        l=query.l,
        d=query.d,
        gates_per_token=g,
        use_ancilla_select=query.use_ancilla_select,
        control_qubits=m,
        ancilla_qubits=QSVT_ANCILLAE + (max(m - 2, 0) if query.use_ancilla_select else 0),
        total_qubits=qubit_count(query),
        multicontrolled_cost=mcg,
        gates_select=gates_select,
        gates_prep_bound=gates_prep,
        gates_qsvt_projectors=gates_projectors,
        gates_total=gates_total,
        asymptotic_class=asymptotic,
        notes=notes,
    )
    logger.debug(f"[RESOURCES] q={query.q} n={query.n} l={query.l} d={query.d} -> {gates_total} gates")
    return result


def sweep(queries: Iterable[ResourceQuery]) -> List[ResourceEstimate]:
    """estimate over a sequence of queries, in order."""
    return [estimate(query) for query in queries]
