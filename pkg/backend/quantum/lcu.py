"""
Linear Combination of Unitaries mixer.

M = sum_j b_j U_j(theta_j) with b_j = exp(i*gamma_j) * a_j^2 and
a = a_raw / ||a_raw||_2, so sum_j |b_j| = 1 holds by construction.

Two paths:
    - matrix-free (production): every U_j is applied to a copy of the
      register and the images are summed with weights b_j. When all token
      circuits share one gate layout, the n applications run as a single
      batched sweep and the weighted sum is reduced in token order.
    - explicit (verification only): dense U_PREP, U_SEL and
      U_M = (U_PREP^dagger (x) I) U_SEL (U_PREP (x) I), with the control
      register in the high bits of the basis index.

Usage:
    from backend.quantum.lcu import LcuCoefficients, BlockEncodingSpec, apply_m

    spec = BlockEncodingSpec.shared(coeffs, circuit14(3, 1), token_params)
    out = apply_m(spec, zero_state(3))
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from app.config.settings import settings
from backend.quantum.circuits import dense_matrix, run_circuit, with_global_phase
from backend.quantum.qstate import zero_state
from backend.quantum.types import DenseOperator, GateCircuit, StateVector


logger = logging.getLogger(__name__)


class LcuError(Exception):
    """Raised when an LCU mixer cannot be built or applied."""
    pass


@dataclass
class LcuCoefficients:
    """
    Trainable LCU coefficient parameters.

    raw_amplitudes are normalized inside the forward pass; phases are free
    angles in radians.
    """
    raw_amplitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        """Validate lengths and finiteness."""
        self.raw_amplitudes = np.asarray(self.raw_amplitudes, dtype=np.float64)
        self.phases = np.asarray(self.phases, dtype=np.float64)
        if self.raw_amplitudes.ndim != 1 or self.raw_amplitudes.size < 1:
            raise ValueError("raw_amplitudes must be a nonempty vector")
        if self.phases.shape != self.raw_amplitudes.shape:
            raise ValueError(
                f"phases has shape {self.phases.shape}, "
                f"raw_amplitudes has {self.raw_amplitudes.shape}"
            )
        if not (np.all(np.isfinite(self.raw_amplitudes)) and np.all(np.isfinite(self.phases))):
            raise ValueError("LCU coefficients must be finite")

    @property
    def n(self) -> int:
        return self.raw_amplitudes.size


@dataclass
class BlockEncodingSpec:
    """
    n token circuits and their parameters, mixed by LcuCoefficients.

    token_params is an (n, P) array; row j feeds token_circuits[j].
    """
    coeffs: LcuCoefficients
    token_circuits: Tuple[GateCircuit, ...]
    token_params: np.ndarray

    def __post_init__(self):
        """Validate that circuits agree in size and match the coefficient count."""
        self.token_circuits = tuple(self.token_circuits)
        self.token_params = np.asarray(self.token_params, dtype=np.float64)
        n = self.coeffs.n
        if len(self.token_circuits) != n:
            raise ValueError(f"{len(self.token_circuits)} token circuits for {n} coefficients")
        first = self.token_circuits[0]
        for circ in self.token_circuits[1:]:
            if circ.num_qubits != first.num_qubits or circ.num_params != first.num_params:
                raise ValueError("token circuits must share qubit and parameter counts")
        if self.token_params.shape != (n, first.num_params):
            raise ValueError(
                f"token_params must have shape {(n, first.num_params)}, "
                f"got {self.token_params.shape}"
            )

    @classmethod
    def shared(
        cls,
        coeffs: LcuCoefficients,
        circuit: GateCircuit,
        token_params: np.ndarray,
    ) -> "BlockEncodingSpec":
        """Spec whose n tokens all use the same circuit layout."""
        return cls(coeffs, (circuit,) * coeffs.n, token_params)

    @property
    def n(self) -> int:
        return self.coeffs.n

    @property
    def num_qubits(self) -> int:
        return self.token_circuits[0].num_qubits

    @property
    def shares_layout(self) -> bool:
        first = self.token_circuits[0]
        return all(circ == first for circ in self.token_circuits)


def effective_coefficients(coeffs: LcuCoefficients) -> np.ndarray:
    """
    b_j = exp(i*gamma_j) * a_j^2 with a = a_raw / ||a_raw||_2.

    Returns:
        np.ndarray: Complex (n,) vector with sum |b_j| = 1

    Raises:
        LcuError: If every raw amplitude is zero
    """
    norm = np.linalg.norm(coeffs.raw_amplitudes)
    if norm == 0.0:
        raise LcuError("all-zero raw amplitudes have no normalization")
    a = coeffs.raw_amplitudes / norm
    return np.exp(1j * coeffs.phases) * a**2


def token_images(
    circuit: GateCircuit,
    params: np.ndarray,
    states: np.ndarray,
    adjoint: bool = False,
) -> np.ndarray:
    """
    U_j(theta_j)|v_b> for every token j of every batch column b, in one sweep.

    Args:
        circuit: Shared token circuit layout
        params: (P, B, n) angles
        states: (2^q, B) register columns
        adjoint: Apply U_j^dagger instead

    Returns:
        np.ndarray: (2^q, B, n) images
    """
    num_params, batch, n = params.shape
    dim = states.shape[0]
    tiled = np.repeat(states, n, axis=1)
    images = run_circuit(circuit, params.reshape(num_params, batch * n), tiled, adjoint=adjoint)
    return images.reshape(dim, batch, n)


def mix_batch(
    circuit: GateCircuit,
    params: np.ndarray,
    b: np.ndarray,
    states: np.ndarray,
    adjoint: bool = False,
) -> np.ndarray:
    """
    Batched M (or M^dagger) applied column-wise.

    Args:
        circuit: Shared token circuit layout
        params: (P, B, n) per-context token angles
        b: (n,) effective coefficients
        states: (2^q, B) register columns

    Returns:
        np.ndarray: (2^q, B), column b equal to sum_j b_j U_j^{(b)} states[:, b]
    """
    images = token_images(circuit, params, states, adjoint=adjoint)
    weights = np.conj(b) if adjoint else b
    return np.einsum("xbj,j->xb", images, weights)


def _check_register(spec: BlockEncodingSpec, state: StateVector) -> None:
    if state.num_qubits != spec.num_qubits:
        raise LcuError(
            f"{state.num_qubits}-qubit state does not fit a {spec.num_qubits}-qubit mixer"
        )


def _apply(spec: BlockEncodingSpec, state: StateVector, adjoint: bool) -> StateVector:
    _check_register(spec, state)
    b = effective_coefficients(spec.coeffs)
    if spec.shares_layout:
        params = spec.token_params.T[:, None, :]
        out = mix_batch(spec.token_circuits[0], params, b, state.amplitudes[:, None], adjoint)
        return StateVector(spec.num_qubits, out[:, 0])

    weights = np.conj(b) if adjoint else b
    out = np.zeros_like(state.amplitudes)
    for j, circ in enumerate(spec.token_circuits):
        out = out + weights[j] * run_circuit(
            circ, spec.token_params[j], state.amplitudes, adjoint=adjoint
        )
    return StateVector(spec.num_qubits, out)


def apply_m(spec: BlockEncodingSpec, state: StateVector) -> StateVector:
    """
    M|state> = sum_j b_j U_j(theta_j)|state>, generally unnormalized.

    Raises:
        LcuError: On register mismatch or degenerate coefficients
    """
    return _apply(spec, state, adjoint=False)


def apply_m_adjoint(spec: BlockEncodingSpec, state: StateVector) -> StateVector:
    """
    M^dagger|state> = sum_j conj(b_j) U_j^dagger|state>.

    Raises:
        LcuError: On register mismatch or degenerate coefficients
    """
    return _apply(spec, state, adjoint=True)


def control_register_size(n: int) -> int:
    """ceil(log2 n) control qubits addressing n terms (0 for a single term)."""
    if n < 1:
        raise LcuError(f"term count must be >= 1, got {n}")
    return (n - 1).bit_length()


def prep_unitary(amplitudes: Sequence[float]) -> DenseOperator:
    """
    Dense U_PREP whose first column is the given unit amplitude vector.

    The other columns come from a complete QR factorisation of the identity
    with its first column replaced by the amplitudes. Length is zero-padded
    to the next power of two.

    Raises:
        LcuError: If the amplitudes are not unit-norm
    """
    a = np.asarray(amplitudes, dtype=np.float64)
    if abs(np.linalg.norm(a) - 1.0) > 1e-12:
        raise LcuError(f"PREP amplitudes must have unit norm, got {np.linalg.norm(a):.3e}")
    dim = 1 << control_register_size(a.size)
    v = np.identity(dim, dtype=np.float64)
    v[:, 0] = 0.0
    v[: a.size, 0] = a
    q, r = np.linalg.qr(v, mode="complete")
    q[:, 0] *= np.sign(r[0, 0])
    if np.linalg.norm(q[:, 0] - v[:, 0]) > 1e-12:
        raise LcuError("QR completion did not reproduce the PREP column")
    return DenseOperator(dim, q)


def _check_dense_size(spec: BlockEncodingSpec) -> int:
    m = control_register_size(spec.n)
    limit = settings.dense_qubit_limit
    if spec.num_qubits + m > limit:
        raise LcuError(
            f"explicit block encoding needs {spec.num_qubits + m} qubits, limit is {limit}"
        )
    return m


def select_unitary(spec: BlockEncodingSpec) -> DenseOperator:
    """
    Dense U_SEL = sum_j |j><j| (x) exp(i*gamma_j) U_j, padded with identities.

    Raises:
        LcuError: If the register exceeds the dense limit
    """
    m = _check_dense_size(spec)
    block = 1 << spec.num_qubits
    dim = block << m
    select = np.zeros((dim, dim), dtype=np.complex128)
    for j in range(1 << m):
        rows = slice(j * block, (j + 1) * block)
        if j < spec.n:
            phased = with_global_phase(spec.token_circuits[j])
            params = np.append(spec.token_params[j], spec.coeffs.phases[j])
            select[rows, rows] = dense_matrix(phased, params).entries
        else:
            select[rows, rows] = np.eye(block)
    return DenseOperator(dim, select)


def build_explicit_block_encoding(spec: BlockEncodingSpec) -> DenseOperator:
    """
    Dense U_M on ceil(log2 n) + q qubits.

    Its top-left 2^q block equals sum_j a_j^2 exp(i*gamma_j) U_j = M.
    Non-power-of-two n is padded with identity unitaries of weight zero.

    Raises:
        LcuError: If the register exceeds the dense limit
    """
    m = _check_dense_size(spec)
    norm = np.linalg.norm(spec.coeffs.raw_amplitudes)
    if norm == 0.0:
        raise LcuError("all-zero raw amplitudes have no normalization")
    amplitudes = np.zeros(1 << m)
    amplitudes[: spec.n] = np.abs(spec.coeffs.raw_amplitudes) / norm

    identity = np.eye(1 << spec.num_qubits)
    prep = np.kron(prep_unitary(amplitudes).entries, identity)
    select = select_unitary(spec).entries
    u_m = prep.conj().T @ select @ prep
    logger.debug(f"[LCU] explicit block encoding on {m} control + {spec.num_qubits} data qubits")
    return DenseOperator(u_m.shape[0], u_m)


def top_left_block(op: DenseOperator, q: int) -> np.ndarray:
    """(<0| (x) I) op (|0> (x) I) for a control register in the high bits."""
    block = 1 << q
    return op.entries[:block, :block]


def postselection_prob_m(spec: BlockEncodingSpec) -> float:
    """p_M = ||M|0>||^2."""
    image = apply_m(spec, zero_state(spec.num_qubits))
    return float(np.vdot(image.amplitudes, image.amplitudes).real)


def postselection_prob_m_expansion(spec: BlockEncodingSpec) -> float:
    """
    p_M by the cross-term expansion

        sum_j |b_j|^2 + sum_{j<k} 2 Re[conj(b_j) b_k <0|U_j^dagger U_k|0>]
    """
    b = effective_coefficients(spec.coeffs)
    zero = zero_state(spec.num_qubits).amplitudes
    images = np.stack(
        [run_circuit(c, p, zero) for c, p in zip(spec.token_circuits, spec.token_params)],
        axis=1,
    )
    overlaps = images.conj().T @ images
    total = float(np.sum(np.abs(b) ** 2))
    for j in range(spec.n):
        for k in range(j + 1, spec.n):
            total += 2.0 * float((np.conj(b[j]) * b[k] * overlaps[j, k]).real)
    return total


def dense_mixer(spec: BlockEncodingSpec) -> DenseOperator:
    """
    Dense M = sum_j b_j U_j (verification oracle).

    Raises:
        LcuError: If the register exceeds the dense limit
    """
    _check_dense_size(spec)
    b = effective_coefficients(spec.coeffs)
    dim = 1 << spec.num_qubits
    total = np.zeros((dim, dim), dtype=np.complex128)
    for j, (circ, params) in enumerate(zip(spec.token_circuits, spec.token_params)):
        total += b[j] * dense_matrix(circ, params).entries
    return DenseOperator(dim, total)
