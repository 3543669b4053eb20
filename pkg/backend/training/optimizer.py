"""
Adam with decoupled weight decay, cosine annealing and global-norm clipping.

All functions work on flat float64 vectors (ParameterBundle.values) and
return new arrays; nothing is updated in place.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


logger = logging.getLogger(__name__)


class TrainingError(Exception):
    """Raised when optimization cannot continue."""
    pass


@dataclass
class AdamState:
    """First and second moment estimates."""
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size))


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    step_index: int,
    lr_t: float,
    weight_decay: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    decay_mask: Optional[np.ndarray] = None,
    update_mask: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, AdamState]:
    """
    One Adam update with bias correction.

    Weight decay is decoupled: parameters are first scaled by
    (1 - lr_t * weight_decay) wherever decay_mask is 1, then the Adam step
    is applied. Entries where update_mask is 0 are left untouched.

    Args:
        params: Flat parameter vector
        grads: Gradient of the same shape
        state: Moments from the previous step
        step_index: 1-based step counter t
        lr_t: Learning rate for this step
        weight_decay: Decoupled decay coefficient
        decay_mask: 1 where decay applies (default everywhere)
        update_mask: 1 where parameters may change (default everywhere)

    Returns:
        Tuple[np.ndarray, AdamState]: Updated parameters and moments

    Raises:
        TrainingError: On shape mismatch or non-finite gradients
    """
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise TrainingError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, moments {state.m.shape}"
        )
    if step_index < 1:
        raise TrainingError(f"step_index is 1-based, got {step_index}")
    if not np.all(np.isfinite(grads)):
        bad = int(np.flatnonzero(~np.isfinite(grads))[0])
        raise TrainingError(f"non-finite gradient at flat index {bad}")

    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads**2
    m_hat = m / (1.0 - beta1**step_index)
    v_hat = v / (1.0 - beta2**step_index)

    decay = lr_t * weight_decay
    if decay_mask is not None:
        decay = decay * decay_mask
    update = lr_t * m_hat / (np.sqrt(v_hat) + eps)
    new_params = params * (1.0 - decay) - update

    if update_mask is not None:
        keep = update_mask.astype(bool)
        new_params = np.where(keep, new_params, params)
        m = np.where(keep, m, state.m)
        v = np.where(keep, v, state.v)
    return new_params, AdamState(m, v)


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float) -> float:
    """
    lr_min + (lr_max - lr_min) * (1 + cos(pi * t / T)) / 2.

    Raises:
        TrainingError: If T = 0 or t is outside [0, T]
    """
    if total_steps <= 0:
        raise TrainingError("cosine schedule needs at least one step")
    if not 0 <= step <= total_steps:
        raise TrainingError(f"step {step} outside [0, {total_steps}]")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * step / total_steps))


def clip_by_global_norm(grads: np.ndarray, max_norm: Optional[float]) -> Tuple[np.ndarray, float]:
    """
    Scale the gradient down to max_norm if its l2 norm exceeds it.

    Returns:
        Tuple[np.ndarray, float]: (clipped gradient, norm before clipping)
    """
    norm = float(np.linalg.norm(grads))
    if max_norm is None or norm <= max_norm:
        return grads, norm
    return grads * (max_norm / norm), norm
