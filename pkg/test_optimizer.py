"""
Tests for Adam with decoupled weight decay, the cosine schedule and
gradient clipping.
"""

import math

import numpy as np
import pytest

from backend.training.optimizer import (
    AdamState,
    TrainingError,
    adam_step,
    clip_by_global_norm,
    cosine_lr,
)


def reference_adam(params, grads_seq, lr_seq, weight_decay, beta1=0.9, beta2=0.999, eps=1e-8):
    """Straight-line loop over scalar coordinates."""
    params = [float(p) for p in params]
    m = [0.0] * len(params)
    v = [0.0] * len(params)
    for t, (grads, lr) in enumerate(zip(grads_seq, lr_seq), 1):
        for i, g in enumerate(grads):
            m[i] = beta1 * m[i] + (1 - beta1) * g
            v[i] = beta2 * v[i] + (1 - beta2) * g * g
            m_hat = m[i] / (1 - beta1**t)
            v_hat = v[i] / (1 - beta2**t)
            params[i] = params[i] * (1 - lr * weight_decay) - lr * m_hat / (math.sqrt(v_hat) + eps)
    return np.array(params)


def test_zero_gradient_and_decay_leave_params():
    params = np.array([0.5, -1.0, 2.0])
    new, state = adam_step(params, np.zeros(3), AdamState.zeros(3), 1, 0.1)
    assert np.array_equal(new, params)
    assert not state.m.any() and not state.v.any()


def test_first_step_moves_by_learning_rate():
    """With a constant gradient the bias-corrected step is lr * sign(g)."""
    params = np.zeros(3)
    grads = np.array([0.3, -2.0, 5.0])
    new, _ = adam_step(params, grads, AdamState.zeros(3), 1, 0.01)
    assert np.allclose(new, -0.01 * np.sign(grads), atol=1e-8)


def test_matches_reference_loop():
    rng = np.random.default_rng(0)
    params = rng.normal(size=5)
    grads_seq = [rng.normal(size=5) for _ in range(6)]
    lr_seq = [cosine_lr(t, 6, 0.05, 0.001) for t in range(6)]
    state = AdamState.zeros(5)
    current = params
    for t, (g, lr) in enumerate(zip(grads_seq, lr_seq), 1):
        current, state = adam_step(current, g, state, t, lr, weight_decay=0.01)
    assert np.allclose(current, reference_adam(params, grads_seq, lr_seq, 0.01), atol=1e-12)


def test_decoupled_weight_decay_and_masks():
    params = np.array([1.0, 1.0, 1.0])
    decay_mask = np.array([1.0, 0.0, 1.0])
    update_mask = np.array([1.0, 1.0, 0.0])
    new, state = adam_step(
        params, np.zeros(3), AdamState.zeros(3), 1, 0.1,
        weight_decay=0.5, decay_mask=decay_mask, update_mask=update_mask,
    )
    assert new.tolist() == pytest.approx([0.95, 1.0, 1.0])

    new, state = adam_step(params, np.ones(3), AdamState.zeros(3), 1, 0.1, update_mask=update_mask)
    assert new[2] == 1.0
    assert state.m[2] == 0.0


def test_adam_rejects_bad_input():
    with pytest.raises(TrainingError):
        adam_step(np.zeros(3), np.zeros(2), AdamState.zeros(3), 1, 0.1)
    with pytest.raises(TrainingError):
        adam_step(np.zeros(2), np.array([np.nan, 0.0]), AdamState.zeros(2), 1, 0.1)
    with pytest.raises(TrainingError):
        adam_step(np.zeros(2), np.zeros(2), AdamState.zeros(2), 0, 0.1)


def test_cosine_schedule():
    assert cosine_lr(0, 100, 1e-2, 1e-4) == pytest.approx(1e-2)
    assert cosine_lr(50, 100, 1e-2, 1e-4) == pytest.approx((1e-2 + 1e-4) / 2)
    assert cosine_lr(100, 100, 1e-2, 1e-4) == pytest.approx(1e-4)
    values = [cosine_lr(t, 20, 1.0, 0.1) for t in range(21)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    with pytest.raises(TrainingError):
        cosine_lr(0, 0, 1.0, 0.1)
    with pytest.raises(TrainingError):
        cosine_lr(21, 20, 1.0, 0.1)


def test_clip_by_global_norm():
    grads = np.array([3.0, 4.0])
    clipped, norm = clip_by_global_norm(grads, 1.0)
    assert norm == pytest.approx(5.0)
    assert np.allclose(clipped, [0.6, 0.8])

    same, norm = clip_by_global_norm(grads, 10.0)
    assert same is grads and norm == pytest.approx(5.0)
    same, _ = clip_by_global_norm(grads, None)
    assert same is grads
