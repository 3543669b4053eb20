"""
Tests for checkpoint save/load.
"""

import numpy as np
import pytest

from backend.model.checkpoint import CHECKPOINT_FORMAT, CheckpointError, load_checkpoint, save_checkpoint
from backend.model.quixer import forward, init_model


def test_round_trip_preserves_model(tmp_path):
    model = init_model(9, 3, 4, 2, 1, embed_dim=6, head_hidden=7, seed=11)
    path = save_checkpoint(
        str(tmp_path / "ckpt.npz"),
        model,
        run_config={"num_qubits": 3, "window": 4},
        vocab=["a", "b", "<unk>", "<eos>", "c", "d", "e", "f", "g"],
    )
    loaded = load_checkpoint(path)
    assert loaded.model.shape_config() == model.shape_config()
    for name, tensor in model.tensors().items():
        assert np.array_equal(loaded.model.tensors()[name], tensor), name
    assert loaded.run_config == {"num_qubits": 3, "window": 4}
    assert loaded.vocab[:4] == ["a", "b", "<unk>", "<eos>"]

    context = [0, 1, 2, 3]
    assert np.array_equal(forward(model, context)[0], forward(loaded.model, context)[0])


def test_suffix_appended(tmp_path):
    model = init_model(5, 2, 2, 1, 1, embed_dim=3, head_hidden=4)
    written = save_checkpoint(str(tmp_path / "nested" / "model"), model)
    assert written.endswith("model.npz")
    assert load_checkpoint(written).vocab == []


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path / "absent.npz"))


def test_wrong_format_tag(tmp_path):
    path = str(tmp_path / "other.npz")
    np.savez(path, format=np.array("something-else/1"), w=np.zeros(3))
    with pytest.raises(CheckpointError) as exc:
        load_checkpoint(path)
    assert "format" in str(exc.value)


def test_missing_tensor(tmp_path):
    model = init_model(5, 2, 2, 1, 1, embed_dim=3, head_hidden=4)
    path = save_checkpoint(str(tmp_path / "full.npz"), model)
    with np.load(path) as archive:
        arrays = {k: archive[k] for k in archive.files if k != "head_b2"}
    broken = str(tmp_path / "broken.npz")
    np.savez(broken, **arrays)
    assert str(arrays["format"]) == CHECKPOINT_FORMAT
    with pytest.raises(CheckpointError):
        load_checkpoint(broken)
