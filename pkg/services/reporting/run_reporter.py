"""
Run Reporter Module

Writes the artifacts of a train or eval run into one output directory:

    config-echo.json    effective RunConfig (a valid config file itself)
    metrics.csv         one row per epoch, columns in METRICS_COLUMNS order
    postselection.csv   per-window postselection probability (eval)
    eval-<split>.json   perplexity and postselection summary of one split (eval)
    steps.jsonl         one JSON object per optimizer step (optional)
    vocab.txt           vocabulary, one token per line in id order

Floats are written with 17 significant digits so a rerun with the same
seed produces byte-identical files. Wall time never enters metrics.csv.
"""

import csv
import json
import logging
import os
from typing import Iterable, List, Optional

import numpy as np

from app.schemas import EvalSummary, RunConfig
from backend.training.trainer import EpochMetrics, StepRecord


logger = logging.getLogger(__name__)

METRICS_COLUMNS = [
    "epoch",
    "train_loss",
    "train_ppl",
    "valid_ppl",
    "postselection_mean",
    "postselection_min",
    "postselection_max",
    "learning_rate",
]

CONFIG_ECHO = "config-echo.json"
METRICS_CSV = "metrics.csv"
POSTSELECTION_CSV = "postselection.csv"
EVAL_SUMMARY = "eval-{split}.json"
STEP_LOG = "steps.jsonl"
CHECKPOINT = "checkpoint.npz"
VOCAB = "vocab.txt"


def _fmt(value: float) -> str:
    return f"{value:.17g}"


class RunReporter:
    """
    Owns one output directory and writes run artifacts into it.

    The step log is opened lazily by the first log_step call and closed by
    close(); the reporter can be used as a context manager.
    """

    def __init__(self, output_dir: str):
        """
        Initialize the reporter, creating the directory if needed.

        Args:
            output_dir: Directory receiving every artifact
        """
        self.output_dir = output_dir
        os.makedirs(output_dir, exist_ok=True)
        self._step_file = None
        logger.info(f"[REPORTER] Writing to {output_dir}")

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def write_config_echo(self, config: RunConfig) -> str:
        """Effective configuration as JSON (re-loadable with --config)."""
        target = self.path(CONFIG_ECHO)
        with open(target, "w", encoding="utf-8") as f:
            f.write(config.model_dump_json(indent=2))
            f.write("\n")
        return target

    def write_metrics(self, rows: Iterable[EpochMetrics]) -> str:
        """metrics.csv with a header and one row per epoch."""
        target = self.path(METRICS_CSV)
        with open(target, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(METRICS_COLUMNS)
            for row in rows:
                writer.writerow([
                    row.epoch,
                    _fmt(row.train_loss),
                    _fmt(row.train_ppl),
                    _fmt(row.valid_ppl),
                    _fmt(row.postselection_mean),
                    _fmt(row.postselection_min),
                    _fmt(row.postselection_max),
                    _fmt(row.learning_rate),
                ])
        return target

    def write_postselection(self, probs: np.ndarray) -> str:
        """postselection.csv: window index and probability, one row per window."""
        target = self.path(POSTSELECTION_CSV)
        with open(target, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["window", "postselection_prob"])
            for i, p in enumerate(probs):
                writer.writerow([i, _fmt(float(p))])
        return target

    def write_eval_summary(self, summary: EvalSummary) -> str:
        """eval-<split>.json, read back by the multi-run aggregate."""
        target = self.path(EVAL_SUMMARY.format(split=summary.split))
        with open(target, "w", encoding="utf-8") as f:
            f.write(summary.model_dump_json(indent=2))
            f.write("\n")
        return target

    def log_step(self, record: StepRecord) -> None:
        """Append one optimizer step to steps.jsonl."""
        if self._step_file is None:
            self._step_file = open(self.path(STEP_LOG), "w", encoding="utf-8")
        self._step_file.write(json.dumps({
            "epoch": record.epoch,
            "step": record.step,
            "loss": record.loss,
            "learning_rate": record.learning_rate,
            "grad_norm": record.grad_norm,
            "wall_time": round(record.wall_time, 6),
        }) + "\n")

    def close(self) -> None:
        if self._step_file is not None:
            self._step_file.close()
            self._step_file = None

    def __enter__(self) -> "RunReporter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def read_metrics(path: str) -> List[dict]:
    """Rows of a metrics.csv as dictionaries of strings."""
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def read_postselection(path: str) -> Optional[np.ndarray]:
    """Probabilities column of a postselection.csv."""
    with open(path, encoding="utf-8", newline="") as f:
        return np.array([float(row["postselection_prob"]) for row in csv.DictReader(f)])
