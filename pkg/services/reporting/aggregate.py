"""
Multi-Run Aggregate Module

Reduces several run directories (usually the same config under different
seeds) to one report: mean and standard deviation of the best validation
perplexity and of the test perplexity, plus the mean and the minimum of the
per-run postselection means.

Each run directory contributes:
    metrics.csv        best epoch = lowest valid_ppl (earliest on ties);
                       its postselection_mean is the run's mean
    eval-test.json     optional; written by `eval --split test`

Usage:
    report = aggregate_runs(["runs/seed0", "runs/seed1"])
    write_aggregate(report, "runs/aggregate.json")
"""

import json
import logging
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from app.schemas import AggregateReport, EvalSummary, RunSummary
from backend.data.textdata import DataError
from services.reporting.run_reporter import EVAL_SUMMARY, METRICS_CSV, read_metrics


logger = logging.getLogger(__name__)


def _read_eval_summary(path: str) -> Optional[EvalSummary]:
    if not os.path.exists(path):
        return None
    try:
        with open(path, encoding="utf-8") as f:
            return EvalSummary.model_validate(json.load(f))
    except (OSError, ValueError, ValidationError) as e:
        raise DataError(f"{path}: unreadable eval summary ({e})")


def summarize_run(run_dir: str) -> RunSummary:
    """
    Best epoch of one run directory, with its test perplexity if evaluated.

    Raises:
        DataError: If metrics.csv is missing, empty or malformed, or an
            eval-test.json does not parse
    """
    metrics_path = os.path.join(run_dir, METRICS_CSV)
    if not os.path.exists(metrics_path):
        raise DataError(f"{metrics_path}: metrics file not found")
    try:
        rows = [
            (int(row["epoch"]), float(row["valid_ppl"]), float(row["postselection_mean"]))
            for row in read_metrics(metrics_path)
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{metrics_path}: malformed metrics row ({e})")
    if not rows:
        raise DataError(f"{metrics_path}: no epochs recorded")

    epoch, valid_ppl, post_mean = min(rows, key=lambda row: (row[1], row[0]))
    test = _read_eval_summary(os.path.join(run_dir, EVAL_SUMMARY.format(split="test")))
    return RunSummary(
        run_dir=run_dir,
        best_epoch=epoch,
        best_valid_ppl=valid_ppl,
        test_ppl=None if test is None else test.perplexity,
        postselection_mean=post_mean,
    )


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    std = float(array.std(ddof=1)) if array.size > 1 else 0.0
    return float(array.mean()), std


def aggregate_runs(run_dirs: Sequence[str]) -> AggregateReport:
    """
    Aggregate report over the given run directories, in the order given.

    Raises:
        DataError: On an empty list or any unreadable run directory
    """
    if not run_dirs:
        raise DataError("no run directories to aggregate")
    runs: List[RunSummary] = [summarize_run(run_dir) for run_dir in run_dirs]

    valid_mean, valid_std = _mean_std([run.best_valid_ppl for run in runs])
    tested = [run.test_ppl for run in runs if run.test_ppl is not None]
    test_mean, test_std = _mean_std(tested) if tested else (None, None)
    if tested and len(tested) < len(runs):
        logger.warning(f"[AGGREGATE] only {len(tested)}/{len(runs)} runs have an eval-test.json")

    post_means = [run.postselection_mean for run in runs]
    report = AggregateReport(
        num_runs=len(runs),
        valid_ppl_mean=valid_mean,
        valid_ppl_std=valid_std,
        test_runs=len(tested),
        test_ppl_mean=test_mean,
        test_ppl_std=test_std,
        postselection_mean=float(np.mean(post_means)),
        postselection_min_of_means=float(np.min(post_means)),
        runs=runs,
    )
    logger.info(
        f"[AGGREGATE] {report.num_runs} runs: valid PPL {valid_mean:.4f} +/- {valid_std:.4f}"
    )
    return report


def write_aggregate(report: AggregateReport, path: str) -> str:
    """Write the report as JSON, creating the parent directory if needed."""
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(report.model_dump_json(indent=2))
        f.write("\n")
    return path
