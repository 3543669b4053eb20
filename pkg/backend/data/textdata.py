"""
Corpus ingestion and next-token windowing.

Input files are UTF-8 plain text, one sentence per line, already split on
whitespace (PTB style with literal <unk> markers). The vocabulary is built
from the training split in first-occurrence order; <unk> and <eos> are
appended when the text does not already contain them.

Windows are (context, target) pairs: context = ids[s..s+n), target =
ids[s+n]. An optimizer step groups `tokens_per_context` consecutive
stride-1 windows per context block and `batch_contexts` blocks per step
(32 x 32 = 1024 pairs in the PTB setup).

Usage:
    lines = load_lines("data/tiny/train.txt")
    vocab = build_vocab(lines)
    stream = encode(vocab, lines)
    contexts, targets = window_arrays(stream, n=8)
"""

import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np


logger = logging.getLogger(__name__)

UNK = "<unk>"
EOS = "<eos>"


class DataError(Exception):
    """Raised when a corpus or vocabulary cannot be used."""
    pass


class Split(str, Enum):
    """Corpus split tag."""
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


@dataclass
class Vocabulary:
    """Dense token <-> id mapping; <unk> and <eos> always present."""
    tokens: List[str]
    token_to_id: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        """Build the reverse map and check bijectivity."""
        self.tokens = list(self.tokens)
        self.token_to_id = {token: i for i, token in enumerate(self.tokens)}
        if len(self.token_to_id) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        for special in (UNK, EOS):
            if special not in self.token_to_id:
                raise ValueError(f"vocabulary is missing {special}")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    @property
    def eos_id(self) -> int:
        return self.token_to_id[EOS]

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, self.unk_id)


@dataclass
class TokenStream:
    """Encoded split: one id per token, sentences concatenated."""
    ids: np.ndarray
    split: Split = Split.TRAIN

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.split = Split(self.split)
        if self.ids.ndim != 1:
            raise ValueError("token ids must be a 1-D sequence")
        if self.ids.size and self.ids.min() < 0:
            raise ValueError("token ids must be non-negative")

    def __len__(self) -> int:
        return int(self.ids.size)

    def check_vocab(self, vocab_size: int) -> None:
        """
        Raises:
            DataError: If any id falls outside the vocabulary
        """
        if self.ids.size and self.ids.max() >= vocab_size:
            raise DataError(
                f"{self.split.value} stream holds id {int(self.ids.max())} "
                f"outside vocabulary of size {vocab_size}"
            )


def load_lines(path: str) -> List[str]:
    """
    Read a UTF-8 corpus file.

    Raises:
        DataError: If the file does not exist or cannot be decoded
    """
    if not os.path.isfile(path):
        raise DataError(f"corpus file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            return f.read().splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read corpus file {path}: {e}")


def build_vocab(train_lines: Sequence[str]) -> Vocabulary:
    """
    Vocabulary of the training split in first-occurrence order.

    Raises:
        DataError: If the text has no tokens
    """
    seen: Dict[str, None] = {}
    for line in train_lines:
        for token in line.split():
            seen.setdefault(token, None)
    if not seen:
        raise DataError("cannot build a vocabulary from an empty corpus")
    tokens = list(seen)
    for special in (UNK, EOS):
        if special not in seen:
            tokens.append(special)
    logger.info(f"[DATA] vocabulary of {len(tokens)} tokens")
    return Vocabulary(tokens)


def encode(
    vocab: Vocabulary,
    lines: Sequence[str],
    append_eos: bool = True,
    split: Split = Split.TRAIN,
) -> TokenStream:
    """
    Map whitespace tokens to ids (OOV -> <unk>), one <eos> after each line.

    Blank lines contribute nothing.
    """
    ids: List[int] = []
    for line in lines:
        tokens = line.split()
        if not tokens:
            continue
        ids.extend(vocab.id_of(token) for token in tokens)
        if append_eos:
            ids.append(vocab.eos_id)
    return TokenStream(np.array(ids, dtype=np.int64), split)


def decode(vocab: Vocabulary, ids: Sequence[int]) -> List[str]:
    """
    Token strings of an id sequence.

    Raises:
        DataError: If an id is outside the vocabulary
    """
    try:
        return [vocab.tokens[int(i)] for i in ids]
    except IndexError:
        raise DataError(f"id outside vocabulary of size {len(vocab)}")


def window_count(length: int, n: int, stride: int = 1) -> int:
    """floor((length - n - 1) / stride) + 1 windows fit a stream of `length`."""
    if length <= n:
        return 0
    return (length - n - 1) // stride + 1


def _check_windowable(stream: TokenStream, n: int, stride: int) -> None:
    if n < 1 or stride < 1:
        raise DataError(f"window {n} and stride {stride} must be >= 1")
    if len(stream) <= n:
        raise DataError(
            f"{stream.split.value} stream of {len(stream)} tokens is too short for window {n}"
        )


def windows(stream: TokenStream, n: int, stride: int = 1) -> Iterator[Tuple[np.ndarray, int]]:
    """
    Yield (context, target) pairs in stream order.

    Raises:
        DataError: If the stream is not longer than n
    """
    _check_windowable(stream, n, stride)
    for s in range(0, len(stream) - n, stride):
        yield stream.ids[s:s + n], int(stream.ids[s + n])


def window_arrays(stream: TokenStream, n: int, stride: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    All windows at once: ((W, n) contexts, (W,) targets).

    Raises:
        DataError: If the stream is not longer than n
    """
    _check_windowable(stream, n, stride)
    count = window_count(len(stream), n, stride)
    contexts = np.lib.stride_tricks.sliding_window_view(stream.ids[:-1], n)[::stride][:count]
    targets = stream.ids[n::stride][:count]
    return np.ascontiguousarray(contexts), targets.copy()


def step_batches(
    num_windows: int,
    batch_contexts: int,
    tokens_per_context: int,
    rng: Optional[np.random.Generator] = None,
) -> List[np.ndarray]:
    """
    Window indices for each optimizer step.

    Windows are cut into blocks of `tokens_per_context` consecutive windows
    (one block per context slot); `batch_contexts` blocks form a step. With
    a generator the block order is shuffled, otherwise it follows the stream.
    The final step may be short.
    """
    starts = np.arange(0, num_windows, tokens_per_context)
    if rng is not None:
        starts = starts[rng.permutation(starts.size)]
    steps = []
    for i in range(0, starts.size, batch_contexts):
        blocks = [
            np.arange(s, min(s + tokens_per_context, num_windows))
            for s in starts[i:i + batch_contexts]
        ]
        steps.append(np.concatenate(blocks))
    return steps


def unigram_perplexity(train: TokenStream, evaluation: TokenStream, vocab_size: int, n: int) -> float:
    """
    Add-one smoothed unigram PPL on the stride-1 window targets of `evaluation`.

    Probabilities come from training-split counts.
    """
    counts = np.bincount(train.ids, minlength=vocab_size).astype(np.float64) + 1.0
    log_probs = np.log(counts / counts.sum())
    targets = evaluation.ids[n:]
    if targets.size == 0:
        raise DataError(f"{evaluation.split.value} stream is too short for window {n}")
    return float(np.exp(-np.mean(log_probs[targets])))


def write_vocab(path: str, vocab: Vocabulary) -> None:
    """One token per line, in id order."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for token in vocab.tokens:
            f.write(token + "\n")


def read_vocab(path: str) -> Vocabulary:
    """
    Raises:
        DataError: If the file is missing or not a valid vocabulary
    """
    lines = load_lines(path)
    try:
        return Vocabulary([line for line in lines if line])
    except ValueError as e:
        raise DataError(f"{path}: {e}")
