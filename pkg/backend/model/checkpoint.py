"""
Model checkpoint format.

A checkpoint is a single .npz archive:

    format          "quixer-checkpoint/1"
    model_config    JSON of QuixerModel.shape_config()
    run_config      JSON of the RunConfig that produced it (may be "{}")
    vocab           token list in id order (may be empty)
    <tensor name>   one little-endian float64 array per trainable tensor

Loading never unpickles (allow_pickle=False).
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from backend.model.quixer import TENSOR_NAMES, ModelError, QuixerModel


logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "quixer-checkpoint/1"


class CheckpointError(Exception):
    """Raised when a checkpoint cannot be written or read."""
    pass


@dataclass
class Checkpoint:
    """A loaded checkpoint."""
    model: QuixerModel
    run_config: Dict[str, Any] = field(default_factory=dict)
    vocab: List[str] = field(default_factory=list)


def save_checkpoint(
    path: str,
    model: QuixerModel,
    run_config: Optional[Dict[str, Any]] = None,
    vocab: Optional[List[str]] = None,
) -> str:
    """
    Write a checkpoint archive.

    Args:
        path: Destination; ".npz" is appended by numpy if missing
        model: Model to store
        run_config: Effective run configuration (JSON-serializable)
        vocab: Token list in id order

    Returns:
        str: Path actually written
    """
    arrays = {name: np.asarray(t, dtype="<f8") for name, t in model.tensors().items()}
    arrays["format"] = np.array(CHECKPOINT_FORMAT)
    arrays["model_config"] = np.array(json.dumps(model.shape_config(), sort_keys=True))
    arrays["run_config"] = np.array(json.dumps(run_config or {}, sort_keys=True))
    arrays["vocab"] = np.array(vocab or [], dtype=str)

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    np.savez(path, **arrays)
    written = path if path.endswith(".npz") else path + ".npz"
    logger.info(f"[CHECKPOINT] wrote {written}")
    return written


def load_checkpoint(path: str) -> Checkpoint:
    """
    Read a checkpoint archive.

    Raises:
        CheckpointError: If the file is missing, has the wrong format tag
            or holds inconsistent tensors
    """
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            tag = str(archive["format"]) if "format" in archive else None
            if tag != CHECKPOINT_FORMAT:
                raise CheckpointError(f"{path}: unsupported checkpoint format {tag!r}")
            config = json.loads(str(archive["model_config"]))
            run_config = json.loads(str(archive["run_config"]))
            vocab = [str(token) for token in archive["vocab"]]
            tensors = {
                name: np.array(archive[name], dtype=np.float64)
                for name in TENSOR_NAMES
                if name in archive
            }
    except (OSError, ValueError, KeyError) as e:
        raise CheckpointError(f"{path}: unreadable checkpoint ({e})")

    try:
        model = QuixerModel.from_tensors(config, tensors)
    except ModelError as e:
        raise CheckpointError(f"{path}: {e}")
    return Checkpoint(model=model, run_config=run_config, vocab=vocab)
