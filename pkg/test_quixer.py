"""
Tests for the Quixer model forward pass.

The main oracle is a straight-line dense re-implementation: every circuit
is realised as a 2^q x 2^q matrix, M and P(M) are formed explicitly and the
readout uses dense Pauli operators.
"""

from functools import reduce

import numpy as np
import pytest

from backend.model.quixer import (
    DegenerateStateError,
    ModelError,
    QuixerModel,
    block_encoding_for,
    evaluate_block_encoding,
    forward,
    forward_batch,
    forward_multilayer,
    init_model,
    readout_expectations,
    token_angles,
)
from backend.quantum.circuits import circuit14, dense_matrix, with_global_phase
from backend.quantum.lcu import BlockEncodingSpec, LcuCoefficients, effective_coefficients
from backend.quantum.qsvt import final_postselection_prob
from backend.quantum.qstate import PAULI_MATRICES, zero_state
from backend.quantum.types import PauliAxis, StateVector


def tiny_model(seed=0, q=3, n=4, d=3, vocab=11, random_poly=True):
    model = init_model(vocab, q, n, d, ansatz_layers=1, embed_dim=8, head_hidden=10, seed=seed)
    if random_poly:
        rng = np.random.default_rng(seed + 100)
        model = model.replace_tensors(poly_coefficients=rng.normal(size=d + 1))
    return model


def dense_pauli(axis, qubit, q):
    factors = [PAULI_MATRICES[axis] if k == qubit else np.eye(2) for k in reversed(range(q))]
    return reduce(np.kron, factors)


def dense_pipeline(model, context):
    """Independent dense evaluation of the whole model."""
    q = model.num_qubits
    circ = circuit14(q, model.ansatz_layers)
    b = effective_coefficients(model.lcu_coeffs)
    mixer = sum(
        b[j] * dense_matrix(circ, model.w_e @ model.embedding_table[token]).entries
        for j, token in enumerate(context)
    )
    poly_m = sum(c * np.linalg.matrix_power(mixer, k) for k, c in enumerate(model.poly.coefficients))
    phi = poly_m[:, 0]
    phi = phi / np.linalg.norm(phi)
    psi = dense_matrix(circ, model.ff_params).entries @ phi
    o = np.array([
        np.vdot(psi, dense_pauli(axis, k, q) @ psi).real
        for axis in (PauliAxis.X, PauliAxis.Y, PauliAxis.Z)
        for k in range(q)
    ])
    hidden = np.maximum(model.head_w1 @ o + model.head_b1, 0.0)
    return model.head_w2 @ hidden + model.head_b2


def test_init_model_shapes_and_determinism():
    model = init_model(50, 4, 8, 3, 2, embed_dim=16, seed=3)
    assert model.num_params_per_circuit == 32
    assert model.w_e.shape == (32, 16)
    assert model.head_hidden == 48
    assert model.head_w1.shape == (48, 12)
    assert model.head_w2.shape == (50, 48)
    assert np.array_equal(model.poly.coefficients, [0, 1, 0, 0])
    again = init_model(50, 4, 8, 3, 2, embed_dim=16, seed=3)
    for name, tensor in model.tensors().items():
        assert np.array_equal(tensor, again.tensors()[name]), name


def test_model_rejects_bad_shapes():
    model = tiny_model()
    with pytest.raises(ModelError):
        model.replace_tensors(head_b2=np.zeros(3))
    tensors = model.tensors()
    del tensors["w_e"]
    with pytest.raises(ModelError):
        QuixerModel.from_tensors(model.shape_config(), tensors)


def test_token_angles():
    model = tiny_model()
    table = model.embedding_table.copy()
    table[2] = 0.0
    zeroed = model.replace_tensors(embedding_table=table)
    assert np.array_equal(token_angles(zeroed, 2), np.zeros(12))

    no_projection = model.replace_tensors(w_e=np.zeros_like(model.w_e))
    assert not token_angles(no_projection, 5).any()

    for token in range(model.vocab_size):
        assert np.allclose(token_angles(model, token), model.w_e @ model.embedding_table[token])
    with pytest.raises(ModelError):
        token_angles(model, model.vocab_size)


def test_constant_polynomial_zero_ff_reads_zero_state():
    """P(x) = 1 and U_FF at zero angles leave |0...0>: X, Y = 0 and Z = +1."""
    model = tiny_model(random_poly=False)
    model = model.replace_tensors(
        poly_coefficients=np.array([1.0, 0.0, 0.0, 0.0]),
        ff_params=np.zeros(12),
    )
    _, trace = forward(model, [1, 2, 3, 4])
    assert np.allclose(trace.expectations[:6], 0.0, atol=1e-12)
    assert np.allclose(trace.expectations[6:], 1.0, atol=1e-12)
    assert trace.postselection_prob == pytest.approx(1.0)


def test_single_token_phase_invariance():
    """n=1, P(x)=x: changing gamma_0 is a global phase and leaves the logits."""
    model = init_model(7, 2, 1, 1, 1, embed_dim=4, head_hidden=5, seed=4)
    logits, _ = forward(model, [3])
    shifted = model.replace_tensors(lcu_phases=model.lcu_coeffs.phases + 1.234)
    shifted_logits, _ = forward(shifted, [3])
    assert np.allclose(logits, shifted_logits, atol=1e-10)


def test_forward_matches_dense_pipeline():
    rng = np.random.default_rng(0)
    for seed in range(5):
        model = tiny_model(seed)
        context = rng.integers(0, model.vocab_size, model.window)
        logits, trace = forward(model, context)
        assert logits.shape == (11,)
        assert np.allclose(logits, dense_pipeline(model, context), atol=1e-8)
        assert trace.final_state.is_normalized()
        assert len(trace.powers) == model.degree + 1


def test_forward_batch_matches_forward():
    model = tiny_model(1)
    rng = np.random.default_rng(1)
    contexts = rng.integers(0, model.vocab_size, (6, model.window))
    tape = forward_batch(model, contexts)
    assert tape.logits.shape == (11, 6)
    for col, context in enumerate(contexts):
        logits, trace = forward(model, context)
        assert np.allclose(tape.logits[:, col], logits, atol=1e-12)
        spec = block_encoding_for(model, context)
        assert tape.postselection_probs[col] == pytest.approx(final_postselection_prob(model.poly, spec))


def test_context_validation():
    model = tiny_model()
    with pytest.raises(ModelError):
        forward(model, [1, 2, 3])
    with pytest.raises(ModelError):
        forward(model, [1, 2, 3, 11])


def test_degenerate_polynomial():
    model = tiny_model().replace_tensors(poly_coefficients=np.zeros(4))
    with pytest.raises(DegenerateStateError):
        forward(model, [0, 1, 2, 3])


def test_global_phase_invariance():
    """exp(i alpha_j) U_j with gamma_j - alpha_j gives the same logits."""
    rng = np.random.default_rng(2)
    model = tiny_model(2)
    context = rng.integers(0, model.vocab_size, model.window)
    reference, _ = forward(model, context)

    base = block_encoding_for(model, context)
    alpha = rng.uniform(-np.pi, np.pi, model.window)
    phased = BlockEncodingSpec.shared(
        LcuCoefficients(model.lcu_coeffs.raw_amplitudes, model.lcu_coeffs.phases - alpha),
        with_global_phase(model.circuit),
        np.column_stack([base.token_params, alpha]),
    )
    logits, _ = evaluate_block_encoding(model, phased)
    assert np.allclose(logits, reference, atol=1e-10)


def test_joint_permutation_invariance():
    rng = np.random.default_rng(3)
    model = tiny_model(3)
    context = rng.integers(0, model.vocab_size, model.window)
    reference, _ = forward(model, context)
    perm = rng.permutation(model.window)
    base = block_encoding_for(model, context)
    permuted = BlockEncodingSpec.shared(
        LcuCoefficients(model.lcu_coeffs.raw_amplitudes[perm], model.lcu_coeffs.phases[perm]),
        model.circuit,
        base.token_params[perm],
    )
    logits, _ = evaluate_block_encoding(model, permuted)
    assert np.allclose(logits, reference, atol=1e-10)


def test_readout_bounded():
    rng = np.random.default_rng(4)
    model = tiny_model(4)
    tape = forward_batch(model, rng.integers(0, model.vocab_size, (20, model.window)))
    assert np.all(np.abs(tape.expectations) <= 1.0 + 1e-10)


def test_readout_expectations_examples():
    q = 3
    o = readout_expectations(zero_state(q))
    assert np.allclose(o[: 2 * q], 0.0)
    assert np.allclose(o[2 * q:], 1.0)

    plus = StateVector(q, np.full(1 << q, 1.0 / np.sqrt(1 << q)))
    o = readout_expectations(plus)
    assert np.allclose(o[:q], 1.0)
    assert np.allclose(o[q:], 0.0, atol=1e-12)

    rng = np.random.default_rng(5)
    amps = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi = amps / np.linalg.norm(amps)
    o = readout_expectations(StateVector(q, psi))
    for block, axis in enumerate([PauliAxis.X, PauliAxis.Y, PauliAxis.Z]):
        for k in range(q):
            assert o[block * q + k] == pytest.approx(np.vdot(psi, dense_pauli(axis, k, q) @ psi).real)

    with pytest.raises(ModelError):
        readout_expectations(StateVector(q, 2 * psi))


def test_multilayer_reductions():
    rng = np.random.default_rng(6)
    first = tiny_model(6)
    context = rng.integers(0, first.vocab_size, first.window)
    single, _ = forward(first, context)
    assert np.allclose(forward_multilayer([first], context), single, atol=1e-12)

    second = tiny_model(7).replace_tensors(poly_coefficients=np.array([1.0, 0.0, 0.0, 0.0]))
    assert np.allclose(forward_multilayer([first, second], context), single, atol=1e-10)


def test_multilayer_matches_dense_product():
    rng = np.random.default_rng(8)
    first, second = tiny_model(8), tiny_model(9)
    context = rng.integers(0, first.vocab_size, first.window)
    circ = first.circuit

    def dense_poly(model):
        b = effective_coefficients(model.lcu_coeffs)
        mixer = sum(
            b[j] * dense_matrix(circ, model.w_e @ model.embedding_table[t]).entries
            for j, t in enumerate(context)
        )
        return sum(c * np.linalg.matrix_power(mixer, k) for k, c in enumerate(model.poly.coefficients))

    # readout of layers[0] applied to P(M')P(M)|0>
    phi = (dense_poly(second) @ dense_poly(first))[:, 0]
    phi = phi / np.linalg.norm(phi)
    psi = dense_matrix(circ, first.ff_params).entries @ phi
    o = np.array([
        np.vdot(psi, dense_pauli(axis, k, 3) @ psi).real
        for axis in (PauliAxis.X, PauliAxis.Y, PauliAxis.Z)
        for k in range(3)
    ])
    hidden = np.maximum(first.head_w1 @ o + first.head_b1, 0.0)
    expected = first.head_w2 @ hidden + first.head_b2
    assert np.allclose(forward_multilayer([first, second], context), expected, atol=1e-8)


def test_multilayer_rejects_mismatched_layers():
    with pytest.raises(ModelError):
        forward_multilayer([], [0, 1, 2, 3])
    other = init_model(11, 2, 4, 3, 1, embed_dim=8, head_hidden=10)
    with pytest.raises(ModelError):
        forward_multilayer([tiny_model(), other], [0, 1, 2, 3])
