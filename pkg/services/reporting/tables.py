"""Aligned text tables for CLI output."""

from typing import List, Sequence, Tuple

from app.schemas import AggregateReport, ResourceEstimate


def _align(rows: Sequence[Tuple[str, str]]) -> str:
    width = max(len(key) for key, _ in rows)
    return "\n".join(f"{key.ljust(width)}  {value}" for key, value in rows)


def format_estimate_table(est: ResourceEstimate) -> str:
    """Two-column table of every ResourceEstimate count, notes last."""
    rows: List[Tuple[str, str]] = [
        ("instance", f"q={est.q} n={est.n} l={est.l} d={est.d}"),
        ("select", "ancilla-assisted" if est.use_ancilla_select else "naive"),
        ("gates_per_token", str(est.gates_per_token)),
        ("control_qubits", str(est.control_qubits)),
        ("ancilla_qubits", str(est.ancilla_qubits)),
        ("total_qubits", str(est.total_qubits)),
        ("multicontrolled_cost", str(est.multicontrolled_cost)),
        ("gates_select", str(est.gates_select)),
        ("gates_prep_bound", str(est.gates_prep_bound)),
        ("gates_qsvt_projectors", str(est.gates_qsvt_projectors)),
        ("gates_total", str(est.gates_total)),
        ("asymptotic_class", est.asymptotic_class),
    ]
    rows.extend(("note", note) for note in est.notes)
    return _align(rows)


def format_verify_table(results) -> str:
    """One line per property: name, PASS/FAIL, seconds, detail."""
    width = max(len(r.name) for r in results)
    lines = [
        f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL'}  {r.seconds:7.2f}s  {r.detail}"
        for r in results
    ]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} properties passed")
    return "\n".join(lines)


def format_aggregate_table(report: AggregateReport) -> str:
    """Per-run best epochs, then the mean +/- std lines."""
    rows: List[Tuple[str, str]] = []
    for run in report.runs:
        test = "-" if run.test_ppl is None else f"{run.test_ppl:.4f}"
        rows.append((
            run.run_dir,
            f"epoch {run.best_epoch}  valid {run.best_valid_ppl:.4f}  test {test}  "
            f"postselection {run.postselection_mean:.4f}",
        ))
    rows.append(("valid_ppl", f"{report.valid_ppl_mean:.4f} +/- {report.valid_ppl_std:.4f}"))
    if report.test_ppl_mean is None:
        rows.append(("test_ppl", "no eval-test.json"))
    else:
        rows.append((
            "test_ppl",
            f"{report.test_ppl_mean:.4f} +/- {report.test_ppl_std:.4f} ({report.test_runs} runs)",
        ))
    rows.append(("postselection_mean", f"{report.postselection_mean:.6f}"))
    rows.append(("postselection_min_of_means", f"{report.postselection_min_of_means:.6f}"))
    return _align(rows)
