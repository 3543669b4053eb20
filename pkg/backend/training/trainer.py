"""
Training loop and perplexity evaluation.

train_model runs Adam with a cosine-annealed learning rate over windowed
next-token pairs, evaluates validation perplexity after every epoch and
keeps the best epoch's model. Everything random (block shuffling and head
dropout) is drawn from one generator seeded by the config, and gradient
chunks are reduced in a fixed order, so a fixed seed reproduces the log
exactly.

Usage:
    result = train_model(model, train_stream, valid_stream, config)
    result.best_model, result.log.rows[-1].valid_ppl
"""

import logging
import math
import time
from dataclasses import dataclass, field
from multiprocessing.pool import ThreadPool
from typing import Callable, List, Optional

import numpy as np

from app.schemas import TrainConfig
from backend.data.textdata import TokenStream, step_batches, window_arrays
from backend.model.grad import ParameterBundle, loss_and_grad
from backend.model.quixer import QuixerModel, forward_batch
from backend.training.optimizer import (
    AdamState,
    TrainingError,
    adam_step,
    clip_by_global_norm,
    cosine_lr,
)


logger = logging.getLogger(__name__)


@dataclass
class EvaluationResult:
    """Perplexity and postselection statistics of one split."""
    ppl: float
    mean_nll: float
    postselection_mean: float
    postselection_min: float
    postselection_max: float
    postselection_probs: np.ndarray = field(repr=False)

    @property
    def num_windows(self) -> int:
        return int(self.postselection_probs.size)


@dataclass
class EpochMetrics:
    """One row of the metrics log. wall_time is excluded from equality."""
    epoch: int
    train_loss: float
    valid_ppl: float
    postselection_mean: float
    postselection_min: float
    postselection_max: float
    learning_rate: float
    wall_time: float = field(default=0.0, compare=False)

    @property
    def train_ppl(self) -> float:
        return math.exp(self.train_loss)


@dataclass
class MetricsLog:
    """Per-epoch metrics in epoch order."""
    rows: List[EpochMetrics] = field(default_factory=list)

    def best(self) -> Optional[EpochMetrics]:
        """Row with the lowest validation perplexity (earliest on ties)."""
        if not self.rows:
            return None
        return min(self.rows, key=lambda row: (row.valid_ppl, row.epoch))


@dataclass
class StepRecord:
    """Per-step diagnostics handed to the on_step callback."""
    epoch: int
    step: int
    loss: float
    learning_rate: float
    grad_norm: float
    wall_time: float


@dataclass
class TrainingResult:
    """Outcome of train_model."""
    best_model: QuixerModel
    log: MetricsLog
    best_epoch: Optional[int]


def evaluate_perplexity(
    model: QuixerModel,
    stream: TokenStream,
    stride: int = 1,
    chunk_size: int = 64,
    threads: int = 1,
) -> EvaluationResult:
    """
    exp(mean NLL) over every window of the stream, dropout off.

    Raises:
        DataError: If the stream is not longer than the window
        DegenerateStateError: Propagated from the forward pass
    """
    contexts, targets = window_arrays(stream, model.window, stride)
    stream.check_vocab(model.vocab_size)
    spans = [(s, min(s + chunk_size, len(targets))) for s in range(0, len(targets), chunk_size)]

    def run(span):
        start, stop = span
        tape = forward_batch(model, contexts[start:stop], None, start)
        logits = tape.logits
        shifted = logits - logits.max(axis=0, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=0))
        nll = log_norm - shifted[targets[start:stop], np.arange(stop - start)]
        return float(nll.sum()), tape.postselection_probs

    if threads > 1 and len(spans) > 1:
        with ThreadPool(processes=min(threads, len(spans))) as pool:
            results = pool.map(run, spans)
    else:
        results = [run(span) for span in spans]

    nll_sum = 0.0
    for chunk_nll, _ in results:
        nll_sum += chunk_nll
    probs = np.concatenate([p for _, p in results])
    mean_nll = nll_sum / len(targets)
    return EvaluationResult(
        ppl=math.exp(mean_nll),
        mean_nll=mean_nll,
        postselection_mean=float(probs.mean()),
        postselection_min=float(probs.min()),
        postselection_max=float(probs.max()),
        postselection_probs=probs,
    )


def _segment_mask(bundle: ParameterBundle, names, value: float) -> np.ndarray:
    mask = np.ones(bundle.total_len)
    for seg in bundle.segments:
        if seg.name in names:
            mask[seg.span] = value
    return mask


def train_model(
    model: QuixerModel,
    train: TokenStream,
    valid: TokenStream,
    config: TrainConfig,
    threads: int = 1,
    chunk_size: int = 64,
    freeze_embeddings: bool = False,
    on_step: Optional[Callable[[StepRecord], None]] = None,
) -> TrainingResult:
    """
    Train and return the best-validation-epoch model with the full log.

    Args:
        model: Initial model (not modified)
        train: Training stream
        valid: Validation stream (model selection)
        config: Optimization knobs; config.window must equal model.window
        threads: Worker threads for gradient chunks
        chunk_size: Contexts per gradient chunk
        freeze_embeddings: Keep the embedding table fixed
        on_step: Optional callback receiving one StepRecord per optimizer step

    Returns:
        TrainingResult: best model, MetricsLog, best epoch (None if epochs = 0)

    Raises:
        TrainingError: On config mismatch or a non-finite loss
        DegenerateStateError: Propagated from the forward pass
    """
    if config.window != model.window:
        raise TrainingError(f"config window {config.window} != model window {model.window}")
    log = MetricsLog()
    if config.epochs == 0:
        logger.info("[TRAIN] epochs=0, returning the initial model")
        return TrainingResult(best_model=model, log=log, best_epoch=None)

    train.check_vocab(model.vocab_size)
    contexts, targets = window_arrays(train, model.window, config.stride)
    rng = np.random.default_rng(config.seed)
    steps_per_epoch = len(step_batches(len(targets), config.batch_contexts, config.tokens_per_context))
    total_steps = config.epochs * steps_per_epoch
    logger.info(
        f"[TRAIN] {len(targets)} windows, {steps_per_epoch} steps/epoch, "
        f"{config.epochs} epochs, {config.step_size} pairs/step"
    )

    params = ParameterBundle.from_model(model)
    decay_mask = _segment_mask(params, {"lcu_phases"}, 0.0)
    update_mask = _segment_mask(params, {"embedding_table"}, 0.0) if freeze_embeddings else None
    adam = AdamState.zeros(params.total_len)

    current = model
    best_model = model
    best_ppl = math.inf
    best_epoch = None
    global_step = 0

    for epoch in range(1, config.epochs + 1):
        started = time.monotonic()
        loss_sum = 0.0
        pair_count = 0
        lr = config.lr_max
        for step, indices in enumerate(
            step_batches(len(targets), config.batch_contexts, config.tokens_per_context, rng), 1
        ):
            lr = cosine_lr(global_step, total_steps, config.lr_max, config.lr_min)
            loss, grads = loss_and_grad(
                current,
                contexts[indices],
                targets[indices],
                dropout=config.dropout,
                rng=rng,
                threads=threads,
                chunk_size=chunk_size,
            )
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch} step {step}")
            clipped, grad_norm = clip_by_global_norm(grads.values, config.clip_norm)
            global_step += 1
            values, adam = adam_step(
                params.values,
                clipped,
                adam,
                global_step,
                lr,
                config.weight_decay,
                config.adam_beta1,
                config.adam_beta2,
                config.adam_eps,
                decay_mask=decay_mask,
                update_mask=update_mask,
            )
            params = ParameterBundle(params.segments, values)
            current = params.to_model(model)

            loss_sum += loss * len(indices)
            pair_count += len(indices)
            logger.debug(
                f"[TRAIN] epoch {epoch} step {step} loss={loss:.4f} lr={lr:.3e} |g|={grad_norm:.3e}"
            )
            if on_step is not None:
                on_step(StepRecord(epoch, step, loss, lr, grad_norm, time.monotonic() - started))

        evaluation = evaluate_perplexity(current, valid, 1, chunk_size, threads)
        row = EpochMetrics(
            epoch=epoch,
            train_loss=loss_sum / pair_count,
            valid_ppl=evaluation.ppl,
            postselection_mean=evaluation.postselection_mean,
            postselection_min=evaluation.postselection_min,
            postselection_max=evaluation.postselection_max,
            learning_rate=lr,
            wall_time=time.monotonic() - started,
        )
        log.rows.append(row)
        logger.info(
            f"[TRAIN] epoch {epoch}/{config.epochs} train_loss={row.train_loss:.4f} "
            f"valid_ppl={row.valid_ppl:.3f} p_mean={row.postselection_mean:.4f} "
            f"p_min={row.postselection_min:.4f} p_max={row.postselection_max:.4f} "
            f"time={row.wall_time:.1f}s"
        )
        if evaluation.ppl < best_ppl:
            best_ppl = evaluation.ppl
            best_model = current
            best_epoch = epoch

    logger.info(f"[TRAIN] best epoch {best_epoch} valid_ppl={best_ppl:.3f}")
    return TrainingResult(best_model=best_model, log=log, best_epoch=best_epoch)
