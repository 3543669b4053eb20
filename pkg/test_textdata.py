"""
Tests for corpus ingestion, vocabulary and windowing.

Covers:
1. Vocabulary construction (first-occurrence order, special tokens)
2. Encoding with <eos> and out-of-vocabulary tokens
3. Window counts and step batching
4. Unigram baseline and vocabulary files
5. The bundled tiny corpus
"""

import numpy as np
import pytest

from backend.data.textdata import (
    EOS,
    UNK,
    DataError,
    Split,
    TokenStream,
    Vocabulary,
    build_vocab,
    decode,
    encode,
    load_lines,
    read_vocab,
    step_batches,
    unigram_perplexity,
    window_arrays,
    window_count,
    windows,
    write_vocab,
)


def test_vocab_first_occurrence_order():
    vocab = build_vocab(["a b a"])
    assert vocab.tokens == ["a", "b", UNK, EOS]
    assert len(vocab) == 4


def test_vocab_keeps_literal_unk():
    vocab = build_vocab(["x <unk> y"])
    assert vocab.tokens == ["x", UNK, "y", EOS]
    assert vocab.unk_id == 1


def test_empty_corpus_rejected():
    with pytest.raises(DataError):
        build_vocab(["", "   "])


def test_vocabulary_validation():
    with pytest.raises(ValueError):
        Vocabulary(["a", "a", UNK, EOS])
    with pytest.raises(ValueError):
        Vocabulary(["a", EOS])


def test_encode_appends_eos_and_maps_oov():
    vocab = build_vocab(["a b a"])
    stream = encode(vocab, ["a b"])
    assert stream.ids.tolist() == [0, 1, 3]
    assert stream.split is Split.TRAIN

    stream = encode(vocab, ["a zebra", "", "b"], split=Split.VALID)
    assert stream.ids.tolist() == [0, vocab.unk_id, 3, 1, 3]
    assert stream.split is Split.VALID

    assert encode(vocab, ["a b"], append_eos=False).ids.tolist() == [0, 1]


def test_decode():
    vocab = build_vocab(["a b a"])
    assert decode(vocab, [1, 0, 3]) == ["b", "a", EOS]
    with pytest.raises(DataError):
        decode(vocab, [4])


def test_stream_vocab_check():
    stream = TokenStream(np.array([0, 5, 2]), Split.TEST)
    stream.check_vocab(6)
    with pytest.raises(DataError):
        stream.check_vocab(5)
    with pytest.raises(ValueError):
        TokenStream(np.array([0, -1]))


def test_window_count():
    assert window_count(5, 2) == 3
    assert window_count(3, 2) == 1
    assert window_count(2, 2) == 0
    assert window_count(10, 3, stride=2) == 4
    assert window_count(8481, 8) == 8473


def test_windows_in_stream_order():
    stream = TokenStream(np.array([10, 11, 12, 13, 14]))
    pairs = [(c.tolist(), t) for c, t in windows(stream, 2)]
    assert pairs == [([10, 11], 12), ([11, 12], 13), ([12, 13], 14)]

    contexts, targets = window_arrays(stream, 2)
    assert contexts.tolist() == [[10, 11], [11, 12], [12, 13]]
    assert targets.tolist() == [12, 13, 14]


def test_single_window_and_too_short():
    stream = TokenStream(np.array([1, 2, 3]))
    contexts, targets = window_arrays(stream, 2)
    assert contexts.shape == (1, 2)
    assert targets.tolist() == [3]
    with pytest.raises(DataError):
        window_arrays(stream, 3)
    with pytest.raises(DataError):
        list(windows(stream, 5))


def test_strided_windows_match_count():
    stream = TokenStream(np.arange(20))
    contexts, targets = window_arrays(stream, 4, stride=3)
    assert len(targets) == window_count(20, 4, 3)
    assert np.array_equal(contexts[:, 0], np.arange(0, 16, 3)[: len(targets)])
    assert np.array_equal(targets, contexts[:, -1] + 1)


def test_step_batches_ptb_shape():
    steps = step_batches(2048, 32, 32)
    assert len(steps) == 2
    assert all(len(s) == 1024 for s in steps)
    assert np.array_equal(steps[0], np.arange(1024))


def test_step_batches_shuffled_cover_every_window():
    steps = step_batches(100, 3, 7, rng=np.random.default_rng(0))
    covered = np.sort(np.concatenate(steps))
    assert np.array_equal(covered, np.arange(100))
    assert len(steps) == 5
    for s in steps:
        # each block is a run of consecutive windows
        blocks = np.split(s, np.flatnonzero(np.diff(s) != 1) + 1)
        assert all(len(b) <= 7 for b in blocks)


def test_unigram_perplexity():
    train = TokenStream(np.array([0, 0, 1]))
    evaluation = TokenStream(np.array([0, 1, 0, 0]), Split.VALID)
    # add-one counts over V=3: [3, 2, 1] / 6
    probs = np.array([3, 2, 1]) / 6.0
    expected = np.exp(-np.mean(np.log(probs[[0, 0]])))
    assert unigram_perplexity(train, evaluation, 3, 2) == pytest.approx(expected)
    with pytest.raises(DataError):
        unigram_perplexity(train, TokenStream(np.array([0, 1])), 3, 2)


def test_vocab_file_round_trip(tmp_path):
    vocab = build_vocab(["the cat sat", "on the mat"])
    path = str(tmp_path / "vocab.txt")
    write_vocab(path, vocab)
    assert read_vocab(path).tokens == vocab.tokens
    with open(path, "w", encoding="utf-8") as f:
        f.write("only\nwords\n")
    with pytest.raises(DataError):
        read_vocab(path)


def test_missing_corpus_file(tmp_path):
    missing = str(tmp_path / "nowhere.txt")
    with pytest.raises(DataError) as exc:
        load_lines(missing)
    assert missing in str(exc.value)


def test_tiny_corpus_vocabulary():
    lines = load_lines("data/tiny/train.txt")
    words = {w for line in lines for w in line.split()}
    vocab = build_vocab(lines)
    assert len(vocab) == len(words) + 2 == 173
    stream = encode(vocab, lines)
    assert len(stream) == sum(len(line.split()) for line in lines) + len(lines)
    valid = encode(vocab, load_lines("data/tiny/valid.txt"), split=Split.VALID)
    assert window_count(len(valid), 8) == len(valid) - 8
