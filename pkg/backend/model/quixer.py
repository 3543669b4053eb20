"""
Quixer model: embeddings -> token circuits -> LCU -> polynomial -> U_FF ->
normalized Pauli readout -> two-layer ReLU head -> next-token logits.

The production path is batched: forward_batch evaluates B contexts at once,
driving all B*n token circuits through one sweep per polynomial power, and
returns every intermediate array so the gradient pass can reuse them.
forward is the single-context wrapper returning a ForwardTrace.

State pipeline per context (w_1..w_n the context tokens):

    theta_j  = W_E @ E[w_j]                         (4lq angles)
    M        = sum_j b_j U(theta_j)
    phi_raw  = P_c(M)|0>,  p = ||phi_raw||^2        (postselection probability)
    phi      = phi_raw / ||phi_raw||
    psi      = U_FF phi
    o        = [<X_k>..., <Y_k>..., <Z_k>...]       (3q values)
    logits   = W2 relu(W1 o + b1) + b2
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from backend.quantum.circuits import circuit14, run_circuit
from backend.quantum.lcu import BlockEncodingSpec, LcuCoefficients, effective_coefficients
from backend.quantum.qsvt import PolynomialSpec, apply_polynomial, apply_polynomial_batch
from backend.quantum.qstate import pauli_expectation_table, zero_state
from backend.quantum.types import GateCircuit, StateVector


logger = logging.getLogger(__name__)

# ||phi_raw|| below this is a degenerate polynomial kernel
DEGENERATE_NORM = 1e-12

# Readout rejects states whose norm deviates from 1 by more than this
READOUT_NORM_TOL = 1e-8

# Flat parameter layout, in order
TENSOR_NAMES = (
    "embedding_table",
    "w_e",
    "lcu_raw_amplitudes",
    "lcu_phases",
    "poly_coefficients",
    "ff_params",
    "head_w1",
    "head_b1",
    "head_w2",
    "head_b2",
)


class ModelError(Exception):
    """Raised when a model is inconsistent or receives invalid input."""
    pass


class DegenerateStateError(ModelError):
    """Raised when P_c(M)|0> vanishes and cannot be normalized."""
    pass


@lru_cache(maxsize=32)
def ansatz(num_qubits: int, layers: int) -> GateCircuit:
    """Shared circuit-14 layout for token unitaries and U_FF."""
    return circuit14(num_qubits, layers)


@dataclass
class QuixerModel:
    """
    Complete trainable parameter bundle plus its shape hyperparameters.

    Shapes (P = 4lq angles per circuit, H = head hidden width):
        embedding_table (V, embed_dim)
        w_e             (P, embed_dim)
        lcu_coeffs      n raw amplitudes + n phases
        poly            d + 1 coefficients
        ff_params       (P,)
        head_w1 (H, 3q), head_b1 (H,), head_w2 (V, H), head_b2 (V,)
    """
    vocab_size: int
    embed_dim: int
    num_qubits: int
    window: int
    degree: int
    ansatz_layers: int
    head_hidden: int
    embedding_table: np.ndarray
    w_e: np.ndarray
    lcu_coeffs: LcuCoefficients
    poly: PolynomialSpec
    ff_params: np.ndarray
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray

    def __post_init__(self):
        """Validate every tensor shape against the hyperparameters."""
        if self.vocab_size < 1 or self.embed_dim < 1 or self.head_hidden < 1:
            raise ValueError("vocab_size, embed_dim and head_hidden must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        p = self.num_params_per_circuit
        expected = {
            "embedding_table": (self.vocab_size, self.embed_dim),
            "w_e": (p, self.embed_dim),
            "ff_params": (p,),
            "head_w1": (self.head_hidden, 3 * self.num_qubits),
            "head_b1": (self.head_hidden,),
            "head_w2": (self.vocab_size, self.head_hidden),
            "head_b2": (self.vocab_size,),
        }
        for name, shape in expected.items():
            value = np.asarray(getattr(self, name), dtype=np.float64)
            if value.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {value.shape}")
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} contains non-finite values")
            setattr(self, name, value)
        if self.lcu_coeffs.n != self.window:
            raise ValueError(f"{self.lcu_coeffs.n} LCU coefficients for window {self.window}")
        if self.poly.degree != self.degree:
            raise ValueError(f"polynomial degree {self.poly.degree} != degree {self.degree}")

    @property
    def num_params_per_circuit(self) -> int:
        return 4 * self.ansatz_layers * self.num_qubits

    @property
    def circuit(self) -> GateCircuit:
        return ansatz(self.num_qubits, self.ansatz_layers)

    def shape_config(self) -> Dict[str, int]:
        """Hyperparameters needed to rebuild the model from its tensors."""
        return {
            "vocab_size": self.vocab_size,
            "embed_dim": self.embed_dim,
            "num_qubits": self.num_qubits,
            "window": self.window,
            "degree": self.degree,
            "ansatz_layers": self.ansatz_layers,
            "head_hidden": self.head_hidden,
        }

    def tensors(self) -> Dict[str, np.ndarray]:
        """Every trainable tensor by name, in TENSOR_NAMES order (copies)."""
        return {
            "embedding_table": self.embedding_table.copy(),
            "w_e": self.w_e.copy(),
            "lcu_raw_amplitudes": self.lcu_coeffs.raw_amplitudes.copy(),
            "lcu_phases": self.lcu_coeffs.phases.copy(),
            "poly_coefficients": self.poly.coefficients.copy(),
            "ff_params": self.ff_params.copy(),
            "head_w1": self.head_w1.copy(),
            "head_b1": self.head_b1.copy(),
            "head_w2": self.head_w2.copy(),
            "head_b2": self.head_b2.copy(),
        }

    @classmethod
    def from_tensors(cls, config: Dict[str, int], tensors: Dict[str, np.ndarray]) -> "QuixerModel":
        """
        Rebuild a model from shape_config() and tensors().

        Raises:
            ModelError: If a tensor is missing or has the wrong shape
        """
        missing = [name for name in TENSOR_NAMES if name not in tensors]
        if missing:
            raise ModelError(f"missing tensors: {missing}")
        try:
            return cls(
                **config,
                embedding_table=tensors["embedding_table"],
                w_e=tensors["w_e"],
                lcu_coeffs=LcuCoefficients(
                    tensors["lcu_raw_amplitudes"], tensors["lcu_phases"]
                ),
                poly=PolynomialSpec(tensors["poly_coefficients"]),
                ff_params=tensors["ff_params"],
                head_w1=tensors["head_w1"],
                head_b1=tensors["head_b1"],
                head_w2=tensors["head_w2"],
                head_b2=tensors["head_b2"],
            )
        except (TypeError, ValueError) as e:
            raise ModelError(f"inconsistent model tensors: {e}")

    def replace_tensors(self, **updates: np.ndarray) -> "QuixerModel":
        """Copy of the model with some tensors swapped out."""
        tensors = self.tensors()
        tensors.update(updates)
        return QuixerModel.from_tensors(self.shape_config(), tensors)


def init_model(
    vocab_size: int,
    num_qubits: int,
    window: int,
    degree: int,
    ansatz_layers: int,
    embed_dim: int = 512,
    head_hidden: Optional[int] = None,
    seed: int = 0,
) -> QuixerModel:
    """
    Fresh model with the documented initialisation.

    - embedding table: standard normal
    - W_E and head layers: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
    - U_FF angles: uniform(-pi, pi)
    - a_raw: uniform(0.5, 1.5); gamma: uniform(-pi, pi)
    - polynomial: P(x) = x, so training starts from the plain LCU model

    Tensors are drawn in TENSOR_NAMES order from one seeded generator.
    """
    rng = np.random.default_rng(seed)
    hidden = head_hidden if head_hidden is not None else 12 * num_qubits
    p = 4 * ansatz_layers * num_qubits
    readout = 3 * num_qubits

    def uniform_layer(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    embedding_table = rng.standard_normal((vocab_size, embed_dim))
    w_e = uniform_layer((p, embed_dim), embed_dim)
    raw = rng.uniform(0.5, 1.5, size=window)
    phases = rng.uniform(-np.pi, np.pi, size=window)
    ff_params = rng.uniform(-np.pi, np.pi, size=p)
    head_w1 = uniform_layer((hidden, readout), readout)
    head_b1 = uniform_layer(hidden, readout)
    head_w2 = uniform_layer((vocab_size, hidden), hidden)
    head_b2 = uniform_layer(vocab_size, hidden)

    model = QuixerModel(
        vocab_size=vocab_size,
        embed_dim=embed_dim,
        num_qubits=num_qubits,
        window=window,
        degree=degree,
        ansatz_layers=ansatz_layers,
        head_hidden=hidden,
        embedding_table=embedding_table,
        w_e=w_e,
        lcu_coeffs=LcuCoefficients(raw, phases),
        poly=PolynomialSpec.identity_map(degree),
        ff_params=ff_params,
        head_w1=head_w1,
        head_b1=head_b1,
        head_w2=head_w2,
        head_b2=head_b2,
    )
    logger.info(
        f"[MODEL] initialised q={num_qubits} n={window} d={degree} l={ansatz_layers} "
        f"V={vocab_size} embed={embed_dim} hidden={hidden} seed={seed}"
    )
    return model


def token_angles(model: QuixerModel, token_id: int) -> np.ndarray:
    """
    theta_w = W_E @ E[w], the 4lq circuit angles of one token.

    Raises:
        ModelError: If token_id is outside the vocabulary
    """
    if not 0 <= token_id < model.vocab_size:
        raise ModelError(f"token id {token_id} outside vocabulary of size {model.vocab_size}")
    return model.w_e @ model.embedding_table[token_id]


def block_encoding_for(model: QuixerModel, context: Sequence[int]) -> BlockEncodingSpec:
    """The BlockEncodingSpec a context induces (one circuit-14 per token)."""
    context = _check_contexts(model, np.asarray(context)[None, :])[0]
    params = model.embedding_table[context] @ model.w_e.T
    return BlockEncodingSpec.shared(model.lcu_coeffs, model.circuit, params)


@dataclass
class BatchForward:
    """
    Every intermediate array of a batched forward pass (B columns).

    powers holds v_0..v_d with shape (d+1, 2^q, B); hidden is the head's
    post-ReLU, post-dropout activation.
    """
    contexts: np.ndarray
    theta: np.ndarray
    b: np.ndarray
    powers: np.ndarray
    phi_raw: np.ndarray
    norms: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    expectations: np.ndarray
    hidden_pre: np.ndarray
    hidden: np.ndarray
    dropout_mask: Optional[np.ndarray]
    logits: np.ndarray

    @property
    def postselection_probs(self) -> np.ndarray:
        return self.norms**2


@dataclass
class ForwardTrace:
    """Diagnostic capture of one context's forward pass."""
    powers: List[StateVector]
    phi_raw: StateVector
    phi: StateVector
    final_state: StateVector
    postselection_prob: float
    expectations: np.ndarray
    logits: np.ndarray = field(repr=False)


def _check_contexts(model: QuixerModel, contexts: np.ndarray) -> np.ndarray:
    contexts = np.asarray(contexts)
    if contexts.ndim != 2 or contexts.shape[1] != model.window:
        raise ModelError(
            f"contexts must have shape (B, {model.window}), got {contexts.shape}"
        )
    if contexts.size and (contexts.min() < 0 or contexts.max() >= model.vocab_size):
        raise ModelError(f"context token ids outside vocabulary of size {model.vocab_size}")
    return contexts.astype(np.int64)


def normalize_columns(phi_raw: np.ndarray, offset: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Column-wise normalization with the degenerate-norm check.

    Raises:
        DegenerateStateError: If any column norm is below DEGENERATE_NORM
    """
    norms = np.sqrt(np.sum(np.abs(phi_raw) ** 2, axis=0))
    bad = np.flatnonzero(norms < DEGENERATE_NORM)
    if bad.size:
        raise DegenerateStateError(
            f"||P(M)|0>|| = {norms[bad[0]]:.3e} below {DEGENERATE_NORM} "
            f"for context {offset + int(bad[0])}"
        )
    return phi_raw / norms, norms


def head_forward(
    model: QuixerModel,
    expectations: np.ndarray,
    dropout_mask: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Two-layer ReLU head on (3q, B) readouts.

    dropout_mask, if given, is the (H, B) inverted-dropout multiplier
    (0 or 1/(1-rate)) applied to the hidden activations.

    Returns:
        Tuple: (hidden_pre, hidden, logits)
    """
    hidden_pre = model.head_w1 @ expectations + model.head_b1[:, None]
    hidden = np.maximum(hidden_pre, 0.0)
    if dropout_mask is not None:
        hidden = hidden * dropout_mask
    logits = model.head_w2 @ hidden + model.head_b2[:, None]
    return hidden_pre, hidden, logits


def forward_batch(
    model: QuixerModel,
    contexts: np.ndarray,
    dropout_mask: Optional[np.ndarray] = None,
    offset: int = 0,
) -> BatchForward:
    """
    Batched forward pass over B contexts.

    Args:
        model: Model to evaluate
        contexts: (B, n) token ids
        dropout_mask: Optional (H, B) head dropout multiplier
        offset: Index of the first context in the caller's batch (error messages)

    Returns:
        BatchForward: All intermediates; logits have shape (V, B)

    Raises:
        ModelError: On malformed contexts
        DegenerateStateError: If any context's P(M)|0> vanishes
    """
    contexts = _check_contexts(model, contexts)
    batch = contexts.shape[0]
    circ = model.circuit
    q = model.num_qubits

    # (B, n, P) -> (P, B, n)
    theta = np.ascontiguousarray((model.embedding_table[contexts] @ model.w_e.T).transpose(2, 0, 1))
    b = effective_coefficients(model.lcu_coeffs)

    initial = np.zeros((1 << q, batch), dtype=np.complex128)
    initial[0] = 1.0
    phi_raw, powers = apply_polynomial_batch(model.poly.coefficients, circ, theta, b, initial)
    phi, norms = normalize_columns(phi_raw, offset)
    psi = run_circuit(circ, model.ff_params, phi)
    expectations = pauli_expectation_table(psi)
    hidden_pre, hidden, logits = head_forward(model, expectations, dropout_mask)

    return BatchForward(
        contexts=contexts,
        theta=theta,
        b=b,
        powers=powers,
        phi_raw=phi_raw,
        norms=norms,
        phi=phi,
        psi=psi,
        expectations=expectations,
        hidden_pre=hidden_pre,
        hidden=hidden,
        dropout_mask=dropout_mask,
        logits=logits,
    )


def _trace_of(tape: BatchForward, q: int, column: int = 0) -> ForwardTrace:
    return ForwardTrace(
        powers=[StateVector(q, v[:, column]) for v in tape.powers],
        phi_raw=StateVector(q, tape.phi_raw[:, column]),
        phi=StateVector(q, tape.phi[:, column]),
        final_state=StateVector(q, tape.psi[:, column]),
        postselection_prob=float(tape.norms[column] ** 2),
        expectations=tape.expectations[:, column].copy(),
        logits=tape.logits[:, column].copy(),
    )


def forward(model: QuixerModel, context: Sequence[int]) -> Tuple[np.ndarray, ForwardTrace]:
    """
    Next-token logits for one context of exactly n tokens.

    Returns:
        Tuple[np.ndarray, ForwardTrace]: (logits (V,), trace)

    Raises:
        ModelError: If the context length differs from n or an id is out of range
        DegenerateStateError: If ||P(M)|0>|| < 1e-12
    """
    tape = forward_batch(model, np.asarray(context)[None, :])
    trace = _trace_of(tape, model.num_qubits)
    return trace.logits, trace


def readout_expectations(state: StateVector) -> np.ndarray:
    """
    [X_0..X_{q-1}, Y_0.., Z_0..] of a normalized state.

    Raises:
        ModelError: If the norm deviates from 1 by more than 1e-8
    """
    norm = state.norm()
    if abs(norm - 1.0) > READOUT_NORM_TOL:
        raise ModelError(f"readout needs a normalized state, got norm {norm:.12f}")
    return pauli_expectation_table(state.amplitudes)


def _readout_logits(model: QuixerModel, phi_raw: StateVector) -> Tuple[np.ndarray, ForwardTrace]:
    phi_cols, norms = normalize_columns(phi_raw.amplitudes[:, None])
    phi = StateVector(model.num_qubits, phi_cols[:, 0])
    psi = StateVector(model.num_qubits, run_circuit(model.circuit, model.ff_params, phi.amplitudes))
    expectations = readout_expectations(psi)
    _, _, logits = head_forward(model, expectations[:, None])
    trace = ForwardTrace(
        powers=[],
        phi_raw=phi_raw,
        phi=phi,
        final_state=psi,
        postselection_prob=float(norms[0] ** 2),
        expectations=expectations,
        logits=logits[:, 0],
    )
    return trace.logits, trace


def evaluate_block_encoding(
    model: QuixerModel,
    encoding: BlockEncodingSpec,
) -> Tuple[np.ndarray, ForwardTrace]:
    """
    Logits for an explicitly supplied mixer, reusing the model's polynomial,
    U_FF and head. Token circuits in `encoding` may differ from circuit 14.

    Raises:
        DegenerateStateError: If ||P(M)|0>|| < 1e-12
    """
    if encoding.num_qubits != model.num_qubits:
        raise ModelError(f"{encoding.num_qubits}-qubit mixer for a {model.num_qubits}-qubit model")
    phi_raw = apply_polynomial(model.poly, encoding, zero_state(model.num_qubits))
    return _readout_logits(model, phi_raw)


def forward_multilayer(layers: Sequence[QuixerModel], context: Sequence[int]) -> np.ndarray:
    """
    Stacked Quixer: P(M_L)...P(M_1)|0>, then U_FF and the head.

    Each layer brings its own embeddings, W_E, LCU coefficients and
    polynomial; the readout (U_FF and head) comes from layers[0]. The state
    is normalized once, after the last layer. A single layer reduces exactly
    to forward.

    Raises:
        ModelError: On an empty stack or mismatched layer shapes
        DegenerateStateError: If the final state vanishes
    """
    if not layers:
        raise ModelError("forward_multilayer needs at least one layer")
    first = layers[0]
    for layer in layers[1:]:
        if layer.num_qubits != first.num_qubits or layer.degree != first.degree:
            raise ModelError("stacked layers must share qubit count and polynomial degree")
        if layer.window != first.window:
            raise ModelError("stacked layers must share the context window")

    state = zero_state(first.num_qubits)
    for layer in layers:
        state = apply_polynomial(layer.poly, block_encoding_for(layer, context), state)
    logits, _ = _readout_logits(first, state)
    return logits
