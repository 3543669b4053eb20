"""
Dense statevector primitives.

Every other simulation module builds on the kernels here. Amplitude arrays
are complex128 with shape (2^q,) for a single state or (2^q, K) for a batch
of K states stored column-wise. Qubit k is bit k of the basis index, so the
kernels view a state as (high bits, bit k, low bits[, batch]) and never
transpose.

Usage:
    from backend.quantum.qstate import basis_state, expectation
    from backend.quantum.types import PauliObservable, PauliAxis

    psi = basis_state(3, 6)
    z1 = expectation(psi, PauliObservable(PauliAxis.Z, 1))   # -1.0
"""

from functools import lru_cache
from typing import Union

import numpy as np

from backend.quantum.types import StateVector, PauliAxis, PauliObservable


# Imaginary residue tolerated in a Pauli expectation before it is discarded
EXPECTATION_IMAG_TOL = 1e-10


class QuantumStateError(Exception):
    """Raised when a statevector operation receives inconsistent inputs."""
    pass


PAULI_MATRICES = {
    PauliAxis.X: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    PauliAxis.Y: np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    PauliAxis.Z: np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def num_qubits_of(amplitudes: np.ndarray) -> int:
    """Register size implied by the leading axis of an amplitude array."""
    dim = amplitudes.shape[0]
    if dim < 2 or dim & (dim - 1):
        raise QuantumStateError(f"leading dimension {dim} is not a power of two >= 2")
    return dim.bit_length() - 1


def apply_one_qubit(amplitudes: np.ndarray, matrix: np.ndarray, qubit: int) -> np.ndarray:
    """
    Apply a 2x2 matrix to one qubit.

    Args:
        amplitudes: (2^q,) or (2^q, K) complex array
        matrix: (2, 2) shared matrix, or (K, 2, 2) one matrix per batch column
        qubit: Target qubit index

    Returns:
        np.ndarray: New array with the same shape as `amplitudes`
    """
    low = 1 << qubit
    if amplitudes.ndim == 1:
        if matrix.ndim != 2:
            raise QuantumStateError("per-column matrices need a batched state")
        psi = amplitudes.reshape(-1, 2, low)
        return np.einsum("ij,ajb->aib", matrix, psi).reshape(amplitudes.shape)

    psi = amplitudes.reshape(-1, 2, low, amplitudes.shape[1])
    if matrix.ndim == 2:
        out = np.einsum("ij,ajbk->aibk", matrix, psi)
    else:
        out = np.einsum("kij,ajbk->aibk", matrix, psi)
    return out.reshape(amplitudes.shape)


@lru_cache(maxsize=256)
def control_mask(num_qubits: int, control: int) -> np.ndarray:
    """Boolean mask of basis indices whose `control` bit is set (read-only, cached)."""
    mask = ((np.arange(1 << num_qubits) >> control) & 1).astype(bool)
    mask.setflags(write=False)
    return mask


def apply_controlled(
    amplitudes: np.ndarray,
    matrix: np.ndarray,
    control: int,
    target: int,
) -> np.ndarray:
    """
    Apply a 2x2 matrix to `target` on the subspace where `control` is |1>.

    Args:
        amplitudes: (2^q,) or (2^q, K) complex array
        matrix: (2, 2) or (K, 2, 2)
        control: Control qubit index
        target: Target qubit index

    Returns:
        np.ndarray: New array with the same shape as `amplitudes`
    """
    mask = control_mask(num_qubits_of(amplitudes), control)
    updated = apply_one_qubit(amplitudes, matrix, target)
    if amplitudes.ndim == 2:
        mask = mask[:, None]
    return np.where(mask, updated, amplitudes)


def zero_state(q: int) -> StateVector:
    """|0...0> on q qubits."""
    return basis_state(q, 0)


def basis_state(q: int, j: int) -> StateVector:
    """
    Computational basis state |j> on q qubits.

    Args:
        q: Number of qubits (>= 1)
        j: Basis index, 0 <= j < 2^q

    Returns:
        StateVector: Amplitude 1 at index j, 0 elsewhere

    Raises:
        QuantumStateError: If j is out of range
    """
    if q < 1:
        raise QuantumStateError(f"qubit count must be >= 1, got {q}")
    if not 0 <= j < (1 << q):
        raise QuantumStateError(f"basis index {j} out of range for {q} qubits")
    amplitudes = np.zeros(1 << q, dtype=np.complex128)
    amplitudes[j] = 1.0
    return StateVector(q, amplitudes)


def _check_same_register(a: StateVector, b: StateVector) -> None:
    if a.num_qubits != b.num_qubits:
        raise QuantumStateError(
            f"dimension mismatch: {a.num_qubits} qubits vs {b.num_qubits} qubits"
        )


def inner_product(a: StateVector, b: StateVector) -> complex:
    """
    <a|b>, conjugating the first argument.

    Raises:
        QuantumStateError: If the registers differ in size
    """
    _check_same_register(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def expectation(state: StateVector, obs: PauliObservable) -> float:
    """
    <psi|O|psi> for a single-qubit Pauli observable.

    The caller normalizes the state first. The imaginary residue of the
    quadratic form is checked against EXPECTATION_IMAG_TOL and discarded.

    Args:
        state: State to measure
        obs: Pauli axis and qubit

    Returns:
        float: Real expectation value

    Raises:
        QuantumStateError: If the qubit is out of range or the residue is too large
    """
    if obs.qubit >= state.num_qubits:
        raise QuantumStateError(
            f"observable qubit {obs.qubit} out of range for {state.num_qubits} qubits"
        )
    image = apply_one_qubit(state.amplitudes, PAULI_MATRICES[obs.axis], obs.qubit)
    value = np.vdot(state.amplitudes, image)
    if abs(value.imag) > EXPECTATION_IMAG_TOL * max(1.0, state.norm() ** 2):
        raise QuantumStateError(
            f"expectation of {obs.axis.value}{obs.qubit} has imaginary residue {value.imag:.3e}"
        )
    return float(value.real)


def pauli_expectation_table(amplitudes: np.ndarray) -> np.ndarray:
    """
    All single-qubit X, Y, Z expectations of one or many states.

    Uses the closed forms <X> = 2 Re(a0* a1), <Y> = 2 Im(a0* a1) and
    <Z> = |a0|^2 - |a1|^2 summed over the other qubits.

    Args:
        amplitudes: (2^q,) or (2^q, K), assumed normalized column-wise

    Returns:
        np.ndarray: (3q,) or (3q, K), ordered [X_0..X_{q-1}, Y_0.., Z_0..]
    """
    q = num_qubits_of(amplitudes)
    batch = amplitudes.shape[1:]
    x_block, y_block, z_block = [], [], []
    for k in range(q):
        psi = amplitudes.reshape((-1, 2, 1 << k) + batch)
        a0, a1 = psi[:, 0], psi[:, 1]
        cross = (a0.conj() * a1).sum(axis=(0, 1))
        x_block.append(2.0 * cross.real)
        y_block.append(2.0 * cross.imag)
        z_block.append((np.abs(a0) ** 2 - np.abs(a1) ** 2).sum(axis=(0, 1)))
    return np.stack(x_block + y_block + z_block)


def axpy_state(alpha: complex, x: StateVector, y: StateVector) -> StateVector:
    """
    y + alpha * x, elementwise.

    Raises:
        QuantumStateError: If the registers differ in size
    """
    _check_same_register(x, y)
    return StateVector(y.num_qubits, y.amplitudes + alpha * x.amplitudes)


def as_state(amplitudes: Union[np.ndarray, StateVector]) -> StateVector:
    """Wrap a raw (2^q,) array as a StateVector (copying)."""
    if isinstance(amplitudes, StateVector):
        return amplitudes.copy()
    array = np.array(amplitudes, dtype=np.complex128)
    return StateVector(num_qubits_of(array), array)
