"""
Tests for exact loss gradients.

The finite-difference check is the main oracle: central differences at
eps = 1e-5 against the analytic gradient on a q=3, n=4, d=3, V=11 model,
at least 20 coordinates in every parameter segment.
"""

import numpy as np
import pytest

from backend.model.grad import (
    GradientError,
    ParameterBundle,
    batch_loss,
    finite_difference_check,
    loss_and_grad,
    parameter_layout,
    relative_error,
)
from backend.model.quixer import TENSOR_NAMES, init_model


def tiny_model(seed=0):
    model = init_model(11, 3, 4, 3, ansatz_layers=1, embed_dim=8, head_hidden=10, seed=seed)
    rng = np.random.default_rng(seed + 50)
    return model.replace_tensors(poly_coefficients=rng.normal(size=4))


def tiny_batch(seed=0, size=6, vocab=11, window=4):
    rng = np.random.default_rng(seed)
    return rng.integers(0, vocab, (size, window)), rng.integers(0, vocab, size)


def test_layout_partitions_parameters():
    model = tiny_model()
    segments = parameter_layout(model)
    assert [s.name for s in segments] == list(TENSOR_NAMES)
    offset = 0
    for s in segments:
        assert s.offset == offset
        offset += s.size
    bundle = ParameterBundle.from_model(model)
    assert bundle.total_len == offset
    rebuilt = bundle.to_model(model)
    for name, tensor in model.tensors().items():
        assert np.array_equal(rebuilt.tensors()[name], tensor)
    assert np.array_equal(bundle.segment("w_e"), model.w_e)


def test_finite_difference_every_segment():
    model = tiny_model(1)
    contexts, targets = tiny_batch(1)
    report = finite_difference_check(model, contexts, targets, epsilon=1e-5, samples_per_segment=20, seed=0)
    assert [s.name for s in report.segments] == list(TENSOR_NAMES)
    for check in report.segments:
        assert check.samples == min(20, ParameterBundle.from_model(model).segment(check.name).size)
        assert check.max_rel_error <= 1e-4, (check.name, check.max_rel_error)
    assert report.passed(1e-4)


def test_finite_difference_coarse_epsilon():
    model = tiny_model(2)
    contexts, targets = tiny_batch(2)
    report = finite_difference_check(model, contexts, targets, epsilon=1e-3, samples_per_segment=5)
    assert report.max_rel_error <= 1e-2


def test_epsilon_range():
    model = tiny_model()
    contexts, targets = tiny_batch()
    with pytest.raises(GradientError):
        finite_difference_check(model, contexts, targets, epsilon=1e-2)
    with pytest.raises(GradientError):
        finite_difference_check(model, contexts, targets, epsilon=1e-9)


def test_output_bias_gradient_with_zero_head():
    """With W2 = 0 every logit is b2, so dL/db2 = mean(softmax(b2) - onehot(t))."""
    model = tiny_model(3)
    model = model.replace_tensors(head_w2=np.zeros_like(model.head_w2))
    contexts, targets = tiny_batch(3, size=8)
    _, grads = loss_and_grad(model, contexts, targets)
    probs = np.exp(model.head_b2 - model.head_b2.max())
    probs /= probs.sum()
    expected = np.zeros(11)
    for t in targets:
        expected += probs - np.eye(11)[t]
    expected /= len(targets)
    assert np.allclose(grads.segment("head_b2"), expected, atol=1e-12)


def test_absent_tokens_have_zero_embedding_gradient():
    model = tiny_model(4)
    contexts = np.array([[0, 1, 2, 3], [1, 2, 3, 0]])
    targets = np.array([5, 6])
    _, grads = loss_and_grad(model, contexts, targets)
    table = grads.segment("embedding_table")
    assert not table[4:].any()
    assert np.abs(table[:4]).sum() > 0


def test_loss_matches_batch_loss():
    model = tiny_model(5)
    contexts, targets = tiny_batch(5, size=9)
    loss, _ = loss_and_grad(model, contexts, targets, chunk_size=4)
    assert loss == pytest.approx(batch_loss(model, contexts, targets), abs=1e-12)


def test_phase_gradient_is_periodic():
    model = tiny_model(10)
    contexts, targets = tiny_batch(10)
    loss, grads = loss_and_grad(model, contexts, targets)
    for j in range(model.window):
        phases = model.lcu_coeffs.phases.copy()
        phases[j] += 2 * np.pi
        shifted_loss, shifted = loss_and_grad(model.replace_tensors(lcu_phases=phases), contexts, targets)
        assert shifted_loss == pytest.approx(loss, abs=1e-10)
        assert np.allclose(shifted.values, grads.values, atol=1e-10), j


def test_repeated_example_matches_single():
    model = tiny_model(11)
    contexts, targets = tiny_batch(11, size=1)
    loss, grads = loss_and_grad(model, contexts, targets)
    for k in (2, 5):
        repeated_loss, repeated = loss_and_grad(model, np.repeat(contexts, k, axis=0), np.repeat(targets, k))
        assert repeated_loss == pytest.approx(loss, abs=1e-12)
        assert np.allclose(repeated.values, grads.values, rtol=1e-12, atol=1e-12)


def test_threads_do_not_change_results():
    """Fixed chunking and ordered reduction give bitwise-equal gradients."""
    model = tiny_model(6)
    contexts, targets = tiny_batch(6, size=10)
    loss1, grads1 = loss_and_grad(model, contexts, targets, threads=1, chunk_size=3)
    loss4, grads4 = loss_and_grad(model, contexts, targets, threads=4, chunk_size=3)
    assert loss1 == loss4
    assert np.array_equal(grads1.values, grads4.values)

    _, grads_big = loss_and_grad(model, contexts, targets, chunk_size=64)
    assert np.allclose(grads_big.values, grads1.values, atol=1e-12)


def test_dropout_needs_generator_and_is_seeded():
    model = tiny_model(7)
    contexts, targets = tiny_batch(7)
    with pytest.raises(GradientError):
        loss_and_grad(model, contexts, targets, dropout=0.5)
    a, ga = loss_and_grad(model, contexts, targets, dropout=0.5, rng=np.random.default_rng(1))
    b, gb = loss_and_grad(model, contexts, targets, dropout=0.5, rng=np.random.default_rng(1))
    assert a == b
    assert np.array_equal(ga.values, gb.values)


def test_malformed_batch():
    model = tiny_model()
    with pytest.raises(GradientError):
        loss_and_grad(model, np.zeros((2, 4), dtype=int), np.zeros(3, dtype=int))
    with pytest.raises(GradientError):
        loss_and_grad(model, np.zeros((2, 4), dtype=int), np.array([0, 11]))


def test_relative_error():
    assert relative_error(1.0, 1.0) == 0.0
    assert relative_error(2.0, 1.0) == pytest.approx(0.5)
    assert relative_error(0.0, 1e-9) < 1e-2
