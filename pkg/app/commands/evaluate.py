"""
`eval` subcommand.

Scores a checkpoint on one split: prints perplexity and the postselection
mean/min/max, writes the per-window postselection probabilities to
<output_dir>/postselection.csv and the summary to
<output_dir>/eval-<split>.json. Corpus paths come from the checkpoint's
stored run config unless a config file or flags override them.

Usage:
    python main.py eval --checkpoint runs/tiny/checkpoint.npz --split valid
"""

import logging
from typing import Any, Dict, Optional

from app.commands.exit_codes import EXIT_OK, report_failure
from app.commands.train import resolve_runtime
from app.config.settings import settings
from app.config.run_config import load_run_config
from app.schemas import EvalSummary, RunConfig
from backend.data.textdata import DataError, Split, Vocabulary, encode, load_lines, read_vocab
from backend.model.checkpoint import load_checkpoint
from backend.training.trainer import EvaluationResult, evaluate_perplexity
from services.reporting import RunReporter


logger = logging.getLogger(__name__)


def split_path(config: RunConfig, split: Split) -> str:
    return {
        Split.TRAIN: config.train_path,
        Split.VALID: config.valid_path,
        Split.TEST: config.test_path,
    }[split]


def resolve_vocab(stored: Optional[Vocabulary], vocab_path: Optional[str], vocab_size: int) -> Vocabulary:
    """
    The vocabulary to encode with, checked against the checkpoint.

    Raises:
        DataError: If there is no vocabulary at all, a supplied vocabulary
            differs from the stored one, or the vocabulary does not match
            the model's output size
    """
    vocab = stored
    if vocab_path is not None:
        supplied = read_vocab(vocab_path)
        if stored is not None and supplied.tokens != stored.tokens:
            raise DataError(
                f"vocab mismatch: {vocab_path} ({len(supplied)} tokens) differs from the "
                f"checkpoint vocabulary ({len(stored)} tokens)"
            )
        vocab = supplied
    if vocab is None:
        raise DataError("checkpoint stores no vocabulary; pass --vocab")
    if len(vocab) != vocab_size:
        raise DataError(f"vocab mismatch: {len(vocab)} tokens but the model predicts {vocab_size}")
    return vocab


def run_evaluation(
    checkpoint_path: str,
    split: Split,
    config_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    vocab_path: Optional[str] = None,
) -> EvaluationResult:
    """
    Load, encode, score and write postselection.csv plus eval-<split>.json.

    Raises:
        CheckpointError, ConfigError, DataError, DegenerateStateError
    """
    checkpoint = load_checkpoint(checkpoint_path)
    model = checkpoint.model
    config = resolve_runtime(load_run_config(config_path, overrides, defaults=checkpoint.run_config))

    stored = None
    if checkpoint.vocab:
        try:
            stored = Vocabulary(checkpoint.vocab)
        except ValueError as e:
            raise DataError(f"{checkpoint_path}: {e}")
    vocab = resolve_vocab(stored, vocab_path, model.vocab_size)

    path = split_path(config, split)
    stream = encode(vocab, load_lines(path), config.append_eos, split)
    unk_rate = float((stream.ids == vocab.unk_id).mean()) if len(stream) else 0.0
    logger.info(f"[EVAL] {path}: {len(stream)} tokens, <unk> rate {unk_rate:.3%}")
    if unk_rate > settings.unk_warn_rate:
        logger.warning(
            f"[EVAL] {unk_rate:.1%} of {path} maps to <unk> (threshold {settings.unk_warn_rate:.1%}); "
            f"the corpus may not match the checkpoint vocabulary"
        )

    result = evaluate_perplexity(model, stream, 1, config.chunk_size, config.threads)
    with RunReporter(config.output_dir) as reporter:
        reporter.write_postselection(result.postselection_probs)
        reporter.write_eval_summary(EvalSummary(
            checkpoint=checkpoint_path,
            split=split.value,
            windows=result.num_windows,
            perplexity=result.ppl,
            postselection_mean=result.postselection_mean,
            postselection_min=result.postselection_min,
            postselection_max=result.postselection_max,
        ))
    return result


def cmd_eval(
    checkpoint_path: str,
    split: str = Split.VALID.value,
    config_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    vocab_path: Optional[str] = None,
) -> int:
    """Entry point of `eval`; returns the process exit code."""
    try:
        result = run_evaluation(checkpoint_path, Split(split), config_path, overrides, vocab_path)
    except Exception as e:
        return report_failure("eval", e)

    print(f"split:              {split}")
    print(f"windows:            {result.num_windows}")
    print(f"perplexity:         {result.ppl:.6f}")
    print(f"postselection mean: {result.postselection_mean:.6f}")
    print(f"postselection min:  {result.postselection_min:.6f}")
    print(f"postselection max:  {result.postselection_max:.6f}")
    return EXIT_OK
