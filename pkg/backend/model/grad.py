"""
Exact gradients of the mean cross-entropy loss.

Reverse accumulation through the batched forward tape. Complex
intermediates use the cotangent convention

    dL = 2 Re <g, d psi>

so a real parameter theta of a complex map gets dL/dtheta =
2 Re <g, d psi / d theta>. Circuits are differentiated with the adjoint
state method: walk the gates backwards carrying the state and its
cotangent, pairing the cotangent with the generator action at every
parameterised gate.

Minibatches are split into fixed-size chunks. Chunks may run on worker
threads, but their gradients are always reduced in chunk order, so the
result does not depend on the thread count.

Usage:
    from backend.model.grad import loss_and_grad

    loss, grads = loss_and_grad(model, contexts, targets)
    grads.segment("w_e")     # same shape as model.w_e
"""

import logging
from dataclasses import dataclass, field
from multiprocessing.pool import ThreadPool
from typing import Dict, List, Optional, Tuple

import numpy as np

from backend.model.quixer import TENSOR_NAMES, QuixerModel, forward_batch
from backend.quantum.circuits import apply_gate, generator_action
from backend.quantum.lcu import mix_batch, token_images
from backend.quantum.qstate import PAULI_MATRICES, apply_one_qubit
from backend.quantum.types import GateCircuit, PauliAxis


logger = logging.getLogger(__name__)

FD_EPSILON_RANGE = (1e-7, 1e-3)


class GradientError(Exception):
    """Raised when gradients are non-finite or a check is misconfigured."""
    pass


@dataclass(frozen=True)
class Segment:
    """One named tensor inside a flat parameter vector."""
    name: str
    offset: int
    shape: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def span(self) -> slice:
        return slice(self.offset, self.offset + self.size)


def parameter_layout(model: QuixerModel) -> Tuple[Segment, ...]:
    """Segments in TENSOR_NAMES order; offsets partition [0, total_len)."""
    segments = []
    offset = 0
    for name, tensor in model.tensors().items():
        segments.append(Segment(name, offset, tensor.shape))
        offset += tensor.size
    return tuple(segments)


@dataclass
class ParameterBundle:
    """Flat view of every trainable tensor of a model."""
    segments: Tuple[Segment, ...]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.total_len,):
            raise ValueError(f"expected {self.total_len} values, got {self.values.shape}")

    @property
    def total_len(self) -> int:
        return sum(s.size for s in self.segments)

    def segment(self, name: str) -> np.ndarray:
        for s in self.segments:
            if s.name == name:
                return self.values[s.span].reshape(s.shape)
        raise KeyError(name)

    @classmethod
    def from_model(cls, model: QuixerModel) -> "ParameterBundle":
        tensors = model.tensors()
        values = np.concatenate([tensors[name].ravel() for name in TENSOR_NAMES])
        return cls(parameter_layout(model), values)

    def to_model(self, template: QuixerModel) -> QuixerModel:
        """Model with the template's hyperparameters and this bundle's values."""
        tensors = {s.name: self.values[s.span].reshape(s.shape).copy() for s in self.segments}
        return QuixerModel.from_tensors(template.shape_config(), tensors)


@dataclass
class GradientBundle(ParameterBundle):
    """Gradient with the same layout as ParameterBundle."""

    @classmethod
    def from_tensors(cls, segments: Tuple[Segment, ...], grads: Dict[str, np.ndarray]) -> "GradientBundle":
        values = np.concatenate([np.asarray(grads[s.name], dtype=np.float64).ravel() for s in segments])
        return cls(segments, values)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def circuit_vjp(
    circ: GateCircuit,
    params: np.ndarray,
    out_states: np.ndarray,
    cotangent: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Adjoint-state vector-Jacobian product of a circuit, column-wise.

    Args:
        circ: Circuit that produced out_states
        params: (P,) shared or (P, K) per-column parameters
        out_states: (2^q, K) circuit outputs
        cotangent: (2^q, K) cotangent of the outputs

    Returns:
        Tuple[np.ndarray, np.ndarray]: (parameter gradients (P, K),
        cotangent of the inputs (2^q, K))
    """
    state = np.array(out_states, dtype=np.complex128)
    lam = np.array(cotangent, dtype=np.complex128)
    grads = np.zeros((circ.num_params, state.shape[1]))
    for gate in reversed(circ.gates):
        if gate.kind.is_parameterised:
            image = generator_action(gate, state)
            grads[gate.param_slot] += 2.0 * np.real(np.conj(lam) * image).sum(axis=0)
        state = apply_gate(state, gate, params, adjoint=True)
        lam = apply_gate(lam, gate, params, adjoint=True)
    return grads, lam


def readout_cotangent(psi: np.ndarray, expectation_grads: np.ndarray) -> np.ndarray:
    """
    sum_k g_k O_k psi for the (3q, B) readout gradient g.

    With o_k = <psi|O_k|psi>, dL = 2 Re <sum_k g_k O_k psi, d psi>.
    """
    q = psi.shape[0].bit_length() - 1
    out = np.zeros_like(psi)
    for a, axis in enumerate((PauliAxis.X, PauliAxis.Y, PauliAxis.Z)):
        for k in range(q):
            image = apply_one_qubit(psi, PAULI_MATRICES[axis], k)
            out += expectation_grads[a * q + k][None, :] * image
    return out


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=0, keepdims=True))


def _chunk_loss_and_grads(
    model: QuixerModel,
    contexts: np.ndarray,
    targets: np.ndarray,
    mask: Optional[np.ndarray],
    scale: float,
    offset: int,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Summed NLL of one chunk and its gradients, pre-scaled by `scale`."""
    tape = forward_batch(model, contexts, mask, offset)
    circ = model.circuit
    batch = contexts.shape[0]
    cols = np.arange(batch)

    # Cross-entropy and head
    log_probs = _log_softmax(tape.logits)
    loss_sum = float(-log_probs[targets, cols].sum())
    dlogits = np.exp(log_probs)
    dlogits[targets, cols] -= 1.0
    dlogits *= scale

    g_head_w2 = dlogits @ tape.hidden.T
    g_head_b2 = dlogits.sum(axis=1)
    dhidden = model.head_w2.T @ dlogits
    if mask is not None:
        dhidden = dhidden * mask
    dpre = dhidden * (tape.hidden_pre > 0)
    g_head_w1 = dpre @ tape.expectations.T
    g_head_b1 = dpre.sum(axis=1)
    dexp = model.head_w1.T @ dpre

    # Readout and U_FF
    psi_bar = readout_cotangent(tape.psi, dexp)
    ff_cols, phi_bar = circuit_vjp(circ, model.ff_params, tape.psi, psi_bar)
    g_ff = ff_cols.sum(axis=1)

    # Normalization phi = r / ||r||
    overlap = np.real(np.conj(phi_bar) * tape.phi).sum(axis=0)
    r_bar = (phi_bar - overlap * tape.phi) / tape.norms

    # Polynomial r = sum_k c_k v_k
    coeffs = model.poly.coefficients
    degree = coeffs.size - 1
    g_poly = 2.0 * np.real(np.conj(r_bar)[None] * tape.powers).sum(axis=(1, 2))

    w = [None] * (degree + 1)
    w[degree] = coeffs[degree] * r_bar
    for k in range(degree - 1, 0, -1):
        w[k] = coeffs[k] * r_bar + mix_batch(circ, tape.theta, tape.b, w[k + 1], adjoint=True)

    # Mixer: every (v_k, w_{k+1}) pair contributes through b and the token circuits
    dim = tape.phi.shape[0]
    num_params, _, n = tape.theta.shape
    v_in = tape.powers[:degree].transpose(1, 0, 2).reshape(dim, degree * batch)
    w_out = np.stack(w[1:]).transpose(1, 0, 2).reshape(dim, degree * batch)
    params = np.broadcast_to(
        tape.theta[:, None], (num_params, degree, batch, n)
    ).reshape(num_params, degree * batch, n)
    images = token_images(circ, params, v_in)

    beta = np.einsum("xc,xcj->j", np.conj(w_out), images)
    gamma = model.lcu_coeffs.phases
    raw = model.lcu_coeffs.raw_amplitudes
    total = float(np.sum(raw**2))
    probs = raw**2 / total
    g_phases = -2.0 * np.imag(tape.b * beta)
    g_probs = 2.0 * np.real(np.exp(1j * gamma) * beta)
    g_raw = (2.0 * raw / total) * (g_probs - np.dot(g_probs, probs))

    lam = np.conj(tape.b)[None, None, :] * w_out[:, :, None]
    theta_cols, _ = circuit_vjp(
        circ,
        params.reshape(num_params, degree * batch * n),
        images.reshape(dim, degree * batch * n),
        lam.reshape(dim, degree * batch * n),
    )
    g_theta = theta_cols.reshape(num_params, degree, batch, n).sum(axis=1).reshape(num_params, batch * n)

    # theta_{b,j} = W_E E[context[b, j]]
    embedded = model.embedding_table[tape.contexts].reshape(batch * n, model.embed_dim)
    g_w_e = g_theta @ embedded
    g_embedding = np.zeros_like(model.embedding_table)
    np.add.at(g_embedding, tape.contexts.ravel(), g_theta.T @ model.w_e)

    grads = {
        "embedding_table": g_embedding,
        "w_e": g_w_e,
        "lcu_raw_amplitudes": g_raw,
        "lcu_phases": g_phases,
        "poly_coefficients": g_poly,
        "ff_params": g_ff,
        "head_w1": g_head_w1,
        "head_b1": g_head_b1,
        "head_w2": g_head_w2,
        "head_b2": g_head_b2,
    }
    return loss_sum, grads


def _chunks(total: int, chunk_size: int) -> List[Tuple[int, int]]:
    return [(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]


def dropout_masks(rate: float, hidden: int, count: int, rng: np.random.Generator) -> Optional[np.ndarray]:
    """(hidden, count) inverted-dropout multipliers, or None when rate is 0."""
    if rate <= 0.0:
        return None
    keep = rng.random((hidden, count)) >= rate
    return keep / (1.0 - rate)


def _check_batch(model: QuixerModel, contexts: np.ndarray, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    contexts = np.asarray(contexts, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    if contexts.ndim != 2 or targets.shape != (contexts.shape[0],) or targets.size == 0:
        raise GradientError(
            f"need (N, n) contexts with N targets, got {contexts.shape} and {targets.shape}"
        )
    if targets.min() < 0 or targets.max() >= model.vocab_size:
        raise GradientError(f"target ids outside vocabulary of size {model.vocab_size}")
    return contexts, targets


def loss_and_grad(
    model: QuixerModel,
    contexts: np.ndarray,
    targets: np.ndarray,
    dropout: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    threads: int = 1,
    chunk_size: int = 64,
) -> Tuple[float, GradientBundle]:
    """
    Mean cross-entropy over the batch and its exact gradient.

    Args:
        model: Model to differentiate
        contexts: (N, n) token ids
        targets: (N,) next-token ids
        dropout: Head dropout rate (0 disables)
        rng: Generator for the dropout masks (required when dropout > 0)
        threads: Worker threads for chunk evaluation
        chunk_size: Contexts per chunk; fixes the reduction order

    Returns:
        Tuple[float, GradientBundle]: (loss, gradient)

    Raises:
        GradientError: On malformed batches or non-finite results
        DegenerateStateError: Propagated from the forward pass
    """
    contexts, targets = _check_batch(model, contexts, targets)
    total = contexts.shape[0]
    if dropout > 0.0 and rng is None:
        raise GradientError("dropout needs a random generator")
    masks = dropout_masks(dropout, model.head_hidden, total, rng) if dropout > 0.0 else None
    scale = 1.0 / total

    def run(span):
        start, stop = span
        mask = None if masks is None else masks[:, start:stop]
        return _chunk_loss_and_grads(
            model, contexts[start:stop], targets[start:stop], mask, scale, start
        )

    spans = _chunks(total, chunk_size)
    if threads > 1 and len(spans) > 1:
        with ThreadPool(processes=min(threads, len(spans))) as pool:
            results = pool.map(run, spans)
    else:
        results = [run(span) for span in spans]

    loss_sum = 0.0
    summed = None
    for chunk_loss, chunk_grads in results:
        loss_sum += chunk_loss
        if summed is None:
            summed = chunk_grads
        else:
            for name in TENSOR_NAMES:
                summed[name] = summed[name] + chunk_grads[name]

    loss = loss_sum / total
    grads = GradientBundle.from_tensors(parameter_layout(model), summed)
    if not np.isfinite(loss) or not grads.is_finite():
        raise GradientError(f"non-finite loss or gradient (loss={loss})")
    return loss, grads


def batch_loss(model: QuixerModel, contexts: np.ndarray, targets: np.ndarray, chunk_size: int = 64) -> float:
    """Mean cross-entropy without gradients or dropout."""
    contexts, targets = _check_batch(model, contexts, targets)
    loss_sum = 0.0
    for start, stop in _chunks(contexts.shape[0], chunk_size):
        tape = forward_batch(model, contexts[start:stop], None, start)
        log_probs = _log_softmax(tape.logits)
        loss_sum += float(-log_probs[targets[start:stop], np.arange(stop - start)].sum())
    return loss_sum / contexts.shape[0]


@dataclass
class SegmentCheck:
    """Finite-difference result for one parameter segment."""
    name: str
    samples: int
    max_rel_error: float
    note: str = ""


@dataclass
class FiniteDifferenceReport:
    """Per-segment comparison of analytic and central-difference gradients."""
    epsilon: float
    segments: List[SegmentCheck] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        errors = [s.max_rel_error for s in self.segments if s.samples]
        return max(errors) if errors else 0.0

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error <= tolerance


def relative_error(analytic: float, numeric: float) -> float:
    """|a - n| / max(|a|, |n|, 1e-6)."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)


def finite_difference_check(
    model: QuixerModel,
    contexts: np.ndarray,
    targets: np.ndarray,
    epsilon: float = 1e-5,
    samples_per_segment: int = 20,
    seed: int = 0,
) -> FiniteDifferenceReport:
    """
    Compare loss_and_grad against central differences on sampled coordinates.

    Args:
        model: Model to check (dropout is always off)
        contexts: (N, n) token ids
        targets: (N,) target ids
        epsilon: Step size in [1e-7, 1e-3]
        samples_per_segment: Coordinates drawn per segment (without replacement)
        seed: Sampling seed

    Returns:
        FiniteDifferenceReport: One entry per segment
    """
    low, high = FD_EPSILON_RANGE
    if not low <= epsilon <= high:
        raise GradientError(f"epsilon {epsilon} outside [{low}, {high}]")

    _, grads = loss_and_grad(model, contexts, targets)
    bundle = ParameterBundle.from_model(model)
    rng = np.random.default_rng(seed)
    report = FiniteDifferenceReport(epsilon=epsilon)

    for seg in bundle.segments:
        if seg.size == 0:
            report.segments.append(SegmentCheck(seg.name, 0, 0.0, "empty segment skipped"))
            continue
        picks = rng.choice(seg.size, size=min(samples_per_segment, seg.size), replace=False)
        worst = 0.0
        for local in picks:
            index = seg.offset + int(local)
            values = bundle.values.copy()
            values[index] += epsilon
            plus = batch_loss(ParameterBundle(bundle.segments, values).to_model(model), contexts, targets)
            values[index] -= 2.0 * epsilon
            minus = batch_loss(ParameterBundle(bundle.segments, values).to_model(model), contexts, targets)
            numeric = (plus - minus) / (2.0 * epsilon)
            worst = max(worst, relative_error(grads.values[index], numeric))
        report.segments.append(SegmentCheck(seg.name, len(picks), worst))
        logger.debug(f"[GRAD] {seg.name}: {len(picks)} samples, max rel error {worst:.3e}")
    return report
