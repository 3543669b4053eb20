"""
Tests for the training loop and perplexity evaluation.

Covers:
1. epochs=0 and config/model mismatches
2. Perplexity against an independent per-window NLL computation
3. Uniform logits give PPL = V
4. Learning on a skewed synthetic stream, reproducibility, frozen embeddings
5. The tiny corpus run beating the unigram baseline (slow)
"""

import math

import numpy as np
import pytest

from app.schemas import TrainConfig
from backend.data.textdata import Split, TokenStream, build_vocab, encode, load_lines, unigram_perplexity
from backend.model.quixer import forward, init_model
from backend.training.optimizer import TrainingError
from backend.training.trainer import evaluate_perplexity, train_model


def skewed_stream(length, seed, split=Split.TRAIN):
    """Token 0 after every other token; the rest drawn from 1..5."""
    rng = np.random.default_rng(seed)
    ids = []
    while len(ids) < length:
        ids.extend([0, int(rng.integers(1, 6))])
    return TokenStream(np.array(ids[:length]), split)


def small_model(seed=0, vocab=6):
    return init_model(vocab, 2, 3, 2, 1, embed_dim=4, head_hidden=6, seed=seed)


def small_config(**updates):
    values = dict(
        window=3, epochs=3, batch_contexts=4, tokens_per_context=4,
        lr_max=0.05, lr_min=0.005, weight_decay=0.0, dropout=0.0, seed=0,
    )
    values.update(updates)
    return TrainConfig(**values)


def test_zero_epochs_returns_initial_model():
    model = small_model()
    result = train_model(model, skewed_stream(50, 0), skewed_stream(30, 1, Split.VALID), small_config(epochs=0))
    assert result.best_model is model
    assert result.best_epoch is None
    assert result.log.rows == []
    assert result.log.best() is None


def test_window_mismatch():
    with pytest.raises(TrainingError):
        train_model(small_model(), skewed_stream(50, 0), skewed_stream(30, 1), small_config(window=4))


def test_perplexity_matches_per_window_nll():
    model = small_model(1)
    stream = skewed_stream(40, 2, Split.VALID)
    result = evaluate_perplexity(model, stream, chunk_size=7)
    nll = []
    probs = []
    for s in range(len(stream) - model.window):
        logits, trace = forward(model, stream.ids[s:s + model.window])
        shifted = logits - logits.max()
        nll.append(np.log(np.exp(shifted).sum()) - shifted[stream.ids[s + model.window]])
        probs.append(trace.postselection_prob)
    assert result.num_windows == 37
    assert result.ppl == pytest.approx(math.exp(np.mean(nll)), rel=1e-10)
    assert np.allclose(result.postselection_probs, probs)
    assert result.postselection_min <= result.postselection_mean <= result.postselection_max

    threaded = evaluate_perplexity(model, stream, chunk_size=7, threads=3)
    assert threaded.ppl == result.ppl


def test_uniform_logits_give_vocab_size_perplexity():
    model = small_model(2)
    model = model.replace_tensors(head_w2=np.zeros_like(model.head_w2), head_b2=np.zeros(6))
    result = evaluate_perplexity(model, skewed_stream(25, 3))
    assert result.ppl == pytest.approx(6.0, rel=1e-12)


def test_training_improves_skewed_stream():
    model = small_model(3)
    train, valid = skewed_stream(200, 4), skewed_stream(60, 5, Split.VALID)
    initial = evaluate_perplexity(model, valid).ppl
    result = train_model(model, train, valid, small_config())
    assert len(result.log.rows) == 3
    assert [row.epoch for row in result.log.rows] == [1, 2, 3]
    best = result.log.best()
    assert best.epoch == result.best_epoch
    assert best.valid_ppl < initial
    assert evaluate_perplexity(result.best_model, valid).ppl == pytest.approx(best.valid_ppl, rel=1e-12)
    for row in result.log.rows:
        assert 0.0 < row.postselection_min <= row.postselection_max
        assert row.train_ppl == pytest.approx(math.exp(row.train_loss))
    assert result.log.rows[-1].learning_rate < 0.05


def test_training_is_reproducible():
    train, valid = skewed_stream(120, 6), skewed_stream(40, 7, Split.VALID)
    config = small_config(epochs=2, dropout=0.2)
    first = train_model(small_model(4), train, valid, config)
    second = train_model(small_model(4), train, valid, config, threads=2, chunk_size=5)
    third = train_model(small_model(4), train, valid, config, threads=1, chunk_size=5)
    assert second.log.rows == third.log.rows
    for name, tensor in second.best_model.tensors().items():
        assert np.array_equal(tensor, third.best_model.tensors()[name]), name
    assert len(first.log.rows) == 2


def test_frozen_embeddings_stay_fixed():
    model = small_model(5)
    train, valid = skewed_stream(80, 8), skewed_stream(30, 9, Split.VALID)
    result = train_model(model, train, valid, small_config(epochs=1), freeze_embeddings=True)
    assert np.array_equal(result.best_model.embedding_table, model.embedding_table)
    assert not np.array_equal(result.best_model.head_b2, model.head_b2)


def test_step_callback():
    records = []
    train, valid = skewed_stream(60, 10), skewed_stream(30, 11, Split.VALID)
    train_model(small_model(6), train, valid, small_config(epochs=2), on_step=records.append)
    # 57 windows -> 15 blocks of 4 -> 4 steps per epoch
    assert [(r.epoch, r.step) for r in records] == [(e, s) for e in (1, 2) for s in (1, 2, 3, 4)]
    assert all(r.grad_norm >= 0 for r in records)


@pytest.mark.slow
def test_tiny_corpus_beats_unigram_baseline():
    train_lines = load_lines("data/tiny/train.txt")
    vocab = build_vocab(train_lines)
    train = encode(vocab, train_lines)
    valid = encode(vocab, load_lines("data/tiny/valid.txt"), split=Split.VALID)
    model = init_model(len(vocab), 4, 8, 3, 2, embed_dim=32, seed=0)
    config = TrainConfig(
        window=8, epochs=5, batch_contexts=8, tokens_per_context=8,
        lr_max=0.01, lr_min=1e-4, weight_decay=0.0, dropout=0.0, seed=0,
    )
    result = train_model(model, train, valid, config)
    baseline = unigram_perplexity(train, valid, len(vocab), 8)
    best = result.log.best()
    assert best.valid_ppl < baseline
    assert best.postselection_mean > 0.0
