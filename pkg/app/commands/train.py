"""
`train` subcommand.

Builds the vocabulary from the training split, initialises a model from
the run config, trains it and writes the run artifacts:

    <output_dir>/config-echo.json
    <output_dir>/metrics.csv
    <output_dir>/checkpoint.npz
    <output_dir>/vocab.txt
    <output_dir>/steps.jsonl      (only with --step-log)

Usage:
    python main.py train --config configs/tiny.json --seed 7
"""

import logging
from typing import Any, Dict, Optional

from app.commands.exit_codes import EXIT_OK, report_failure
from app.config import settings
from app.config.run_config import load_run_config
from app.schemas import RunConfig
from backend.data.textdata import Split, build_vocab, encode, load_lines, unigram_perplexity, write_vocab
from backend.model.checkpoint import save_checkpoint
from backend.model.quixer import init_model
from backend.training.trainer import train_model
from services.reporting import RunReporter
from services.reporting.run_reporter import CHECKPOINT, VOCAB


logger = logging.getLogger(__name__)


def resolve_runtime(config: RunConfig) -> RunConfig:
    """
    Fill process-level defaults the run config leaves open.

    output_dir falls back to QUIXER_OUTPUT_DIR; threads falls back to
    QUIXER_THREADS unless the run config sets it explicitly.
    """
    updates: Dict[str, Any] = {}
    if config.output_dir is None:
        updates["output_dir"] = settings.output_dir
    if "threads" not in config.model_fields_set:
        updates["threads"] = settings.threads
    return config.model_copy(update=updates) if updates else config


def run_training(config: RunConfig) -> Dict[str, Any]:
    """
    Train from a resolved config and write every artifact.

    Returns:
        dict: best_epoch, best_valid_ppl, unigram_valid_ppl, output_dir

    Raises:
        DataError, TrainingError, DegenerateStateError, GradientError
    """
    train_lines = load_lines(config.train_path)
    valid_lines = load_lines(config.valid_path)
    vocab = build_vocab(train_lines)
    train = encode(vocab, train_lines, config.append_eos, Split.TRAIN)
    valid = encode(vocab, valid_lines, config.append_eos, Split.VALID)

    model = init_model(
        vocab_size=len(vocab),
        num_qubits=config.num_qubits,
        window=config.window,
        degree=config.degree,
        ansatz_layers=config.ansatz_layers,
        embed_dim=config.embed_dim,
        head_hidden=config.effective_head_hidden,
        seed=config.seed,
    )
    logger.info(
        f"[TRAIN] model q={config.num_qubits} n={config.window} d={config.degree} "
        f"l={config.ansatz_layers} V={len(vocab)} embed={config.embed_dim}"
    )

    with RunReporter(config.output_dir) as reporter:
        reporter.write_config_echo(config)
        result = train_model(
            model,
            train,
            valid,
            config.train_config(),
            threads=config.threads,
            chunk_size=config.chunk_size,
            freeze_embeddings=config.freeze_embeddings,
            on_step=reporter.log_step if config.step_log else None,
        )
        reporter.write_metrics(result.log.rows)
        save_checkpoint(
            reporter.path(CHECKPOINT),
            result.best_model,
            run_config=config.model_dump(),
            vocab=list(vocab.tokens),
        )
        write_vocab(reporter.path(VOCAB), vocab)

    best = result.log.best()
    return {
        "best_epoch": result.best_epoch,
        "best_valid_ppl": best.valid_ppl if best is not None else None,
        "unigram_valid_ppl": unigram_perplexity(train, valid, len(vocab), config.window),
        "output_dir": config.output_dir,
    }


def cmd_train(config_path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> int:
    """Entry point of `train`; returns the process exit code."""
    try:
        config = resolve_runtime(load_run_config(config_path, overrides))
        summary = run_training(config)
    except Exception as e:
        return report_failure("train", e)

    if summary["best_epoch"] is None:
        print(f"no epochs run; initial model written to {summary['output_dir']}")
    else:
        print(
            f"best epoch {summary['best_epoch']}: valid PPL {summary['best_valid_ppl']:.4f} "
            f"(unigram baseline {summary['unigram_valid_ppl']:.4f})"
        )
    print(f"artifacts in {summary['output_dir']}")
    return EXIT_OK
