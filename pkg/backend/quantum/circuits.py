"""
Parameterised gate circuits.

Rotation convention (affects every dense-matrix entry):

    R_A(theta) = exp(-i * theta * A / 2),   A in {X, Y, Z}

so RY(pi) = [[0, -1], [1, 0]]. A GlobalPhase gate multiplies the whole
register by exp(i * theta). Controlled rotations act when the control qubit
is |1>.

Circuits are applied to single states or to batches. A batch carries one
parameter column per state column, so n token unitaries sharing a gate
layout are simulated in one sweep:

    params:     (P,) shared, or (P, K) one column per state
    amplitudes: (2^q,) or (2^q, K)

Usage:
    from backend.quantum.circuits import circuit14, apply_circuit

    circ = circuit14(q=6, layers=4)          # 96 parameters
    out = apply_circuit(circ, params, state)
"""

from collections import Counter
from typing import Dict, Optional

import numpy as np

from app.config.settings import settings
from app.schemas import CircuitDocument, GateDocument
from backend.quantum.qstate import (
    PAULI_MATRICES,
    apply_controlled,
    apply_one_qubit,
    control_mask,
)
from backend.quantum.types import (
    DenseOperator,
    Gate,
    GateCircuit,
    GateKind,
    PauliAxis,
    StateVector,
)


class CircuitError(Exception):
    """Raised when a circuit cannot be applied or realised."""
    pass


_ROTATION_AXIS = {
    GateKind.RX: PauliAxis.X,
    GateKind.RY: PauliAxis.Y,
    GateKind.RZ: PauliAxis.Z,
    GateKind.CRX: PauliAxis.X,
    GateKind.CRY: PauliAxis.Y,
    GateKind.CRZ: PauliAxis.Z,
}


def rotation_matrices(axis: PauliAxis, theta) -> np.ndarray:
    """
    R_axis(theta) for a scalar angle or a vector of angles.

    Args:
        axis: Rotation axis
        theta: float, or (K,) array of angles

    Returns:
        np.ndarray: (2, 2) for a scalar, (K, 2, 2) for a vector
    """
    theta = np.asarray(theta, dtype=np.float64)
    half = theta / 2.0
    c, s = np.cos(half), np.sin(half)
    out = np.zeros(theta.shape + (2, 2), dtype=np.complex128)
    if axis is PauliAxis.X:
        out[..., 0, 0] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
        out[..., 1, 1] = c
    elif axis is PauliAxis.Y:
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
    else:
        out[..., 0, 0] = np.exp(-1j * half)
        out[..., 1, 1] = np.exp(1j * half)
    return out


def _phase_factor(theta, batched: bool):
    factor = np.exp(1j * np.asarray(theta, dtype=np.float64))
    return factor[None, :] if batched and factor.ndim == 1 else factor


def apply_gate(
    amplitudes: np.ndarray,
    gate: Gate,
    params: np.ndarray,
    adjoint: bool = False,
) -> np.ndarray:
    """
    Apply one gate (or its inverse) to a state or batch.

    Args:
        amplitudes: (2^q,) or (2^q, K)
        gate: Gate to apply
        params: (P,) or (P, K) parameter array
        adjoint: Apply the inverse gate instead

    Returns:
        np.ndarray: Updated amplitudes (new array)
    """
    if gate.kind is GateKind.CX:
        return apply_controlled(amplitudes, PAULI_MATRICES[PauliAxis.X], gate.control, gate.target)

    theta = params[gate.param_slot]
    if adjoint:
        theta = -theta

    if gate.kind is GateKind.GLOBAL_PHASE:
        return amplitudes * _phase_factor(theta, amplitudes.ndim == 2)

    matrix = rotation_matrices(_ROTATION_AXIS[gate.kind], theta)
    if gate.kind.is_controlled:
        return apply_controlled(amplitudes, matrix, gate.control, gate.target)
    return apply_one_qubit(amplitudes, matrix, gate.target)


def generator_action(gate: Gate, amplitudes: np.ndarray) -> np.ndarray:
    """
    (dU/dtheta) U^dagger applied to a state, for a parameterised gate.

    Every parameterised gate commutes with its generator, so this is
    -i/2 A on the target (restricted to control = |1> for controlled
    kinds) and i * I for GlobalPhase. The adjoint gradient pairs it with
    the state right after the gate.
    """
    if gate.kind is GateKind.GLOBAL_PHASE:
        return 1j * amplitudes
    if gate.kind is GateKind.CX:
        raise CircuitError("CX has no parameter")

    pauli = PAULI_MATRICES[_ROTATION_AXIS[gate.kind]]
    image = apply_one_qubit(amplitudes, -0.5j * pauli, gate.target)
    if gate.kind.is_controlled:
        mask = control_mask(amplitudes.shape[0].bit_length() - 1, gate.control)
        if amplitudes.ndim == 2:
            mask = mask[:, None]
        image = np.where(mask, image, 0.0)
    return image


def _check_params(circ: GateCircuit, params: np.ndarray) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if params.ndim not in (1, 2) or params.shape[0] != circ.num_params:
        raise CircuitError(
            f"expected {circ.num_params} parameters, got array of shape {params.shape}"
        )
    return params


def run_circuit(
    circ: GateCircuit,
    params: np.ndarray,
    amplitudes: np.ndarray,
    adjoint: bool = False,
) -> np.ndarray:
    """
    Apply U(params) (or U(params)^dagger) to raw amplitudes.

    Args:
        circ: Circuit to apply
        params: (P,) shared or (P, K) per-column parameters
        amplitudes: (2^q,) or (2^q, K)
        adjoint: Apply the inverse circuit (reversed gate order, negated angles)

    Returns:
        np.ndarray: Transformed amplitudes

    Raises:
        CircuitError: On parameter or dimension mismatch
    """
    params = _check_params(circ, params)
    if amplitudes.shape[0] != 1 << circ.num_qubits:
        raise CircuitError(
            f"state of dimension {amplitudes.shape[0]} does not fit a "
            f"{circ.num_qubits}-qubit circuit"
        )
    if params.ndim == 2 and (amplitudes.ndim != 2 or amplitudes.shape[1] != params.shape[1]):
        raise CircuitError("per-column parameters need one state column each")

    out = np.array(amplitudes, dtype=np.complex128)
    gates = reversed(circ.gates) if adjoint else circ.gates
    for gate in gates:
        out = apply_gate(out, gate, params, adjoint=adjoint)
    return out


def _check_state(circ: GateCircuit, params, state: StateVector) -> np.ndarray:
    params = _check_params(circ, params)
    if params.ndim != 1:
        raise CircuitError("apply_circuit takes a single parameter vector")
    if state.num_qubits != circ.num_qubits:
        raise CircuitError(
            f"{state.num_qubits}-qubit state does not fit a {circ.num_qubits}-qubit circuit"
        )
    return params


def apply_circuit(circ: GateCircuit, params: np.ndarray, state: StateVector) -> StateVector:
    """
    U(params)|state>.

    Args:
        circ: Circuit to apply
        params: Real vector of length circ.num_params
        state: Input state on circ.num_qubits qubits

    Returns:
        StateVector: New state, same norm as the input

    Raises:
        CircuitError: On length or dimension mismatch
    """
    params = _check_state(circ, params, state)
    return StateVector(state.num_qubits, run_circuit(circ, params, state.amplitudes))


def apply_adjoint(circ: GateCircuit, params: np.ndarray, state: StateVector) -> StateVector:
    """
    U(params)^dagger|state>.

    Raises:
        CircuitError: On length or dimension mismatch
    """
    params = _check_state(circ, params, state)
    return StateVector(
        state.num_qubits, run_circuit(circ, params, state.amplitudes, adjoint=True)
    )


def dense_matrix(circ: GateCircuit, params: np.ndarray) -> DenseOperator:
    """
    Exact 2^q x 2^q unitary of the circuit (verification oracle).

    Column j is the image of |j>, computed by pushing the identity through
    the circuit as a batch of basis states.

    Raises:
        CircuitError: If q exceeds the dense limit or parameters mismatch
    """
    limit = settings.dense_qubit_limit
    if circ.num_qubits > limit:
        raise CircuitError(
            f"{circ.num_qubits} qubits exceed the dense realisation limit of {limit}"
        )
    params = _check_params(circ, params)
    if params.ndim != 1:
        raise CircuitError("dense_matrix takes a single parameter vector")
    dim = 1 << circ.num_qubits
    identity = np.eye(dim, dtype=np.complex128)
    return DenseOperator(dim, run_circuit(circ, params, identity))


def circuit14(q: int, layers: int) -> GateCircuit:
    """
    Hardware-efficient "circuit 14" ansatz, 4*layers*q parameters.

    Each layer, in application order:
        1. RY on every qubit
        2. CRX ring: control j -> target (j+1) mod q, for j = 0..q-1
        3. RY on every qubit
        4. CRX ring: control (j+1) mod q -> target j, for j = 0..q-1

    Ring orientation follows the 3-qubit single-layer drawing.

    Args:
        q: Qubits (>= 2)
        layers: Layer count l (>= 1)

    Returns:
        GateCircuit: Circuit with slots laid out layer-major, block-minor

    Raises:
        CircuitError: If q < 2 or layers < 1
    """
    if q < 2:
        raise CircuitError(f"circuit14 needs at least 2 qubits, got {q}")
    if layers < 1:
        raise CircuitError(f"circuit14 needs at least 1 layer, got {layers}")

    gates = []
    for layer in range(layers):
        base = 4 * q * layer
        for j in range(q):
            gates.append(Gate(GateKind.RY, target=j, param_slot=base + j))
        for j in range(q):
            gates.append(
                Gate(GateKind.CRX, target=(j + 1) % q, control=j, param_slot=base + q + j)
            )
        for j in range(q):
            gates.append(Gate(GateKind.RY, target=j, param_slot=base + 2 * q + j))
        for j in range(q):
            gates.append(
                Gate(GateKind.CRX, target=j, control=(j + 1) % q, param_slot=base + 3 * q + j)
            )
    return GateCircuit(num_qubits=q, gates=tuple(gates), num_params=4 * layers * q)


def with_global_phase(circ: GateCircuit) -> GateCircuit:
    """
    The same circuit followed by a GlobalPhase gate reading a new last slot.

    Used to realise the phase-absorbed unitaries exp(i*gamma_j) U_j.
    """
    phase = Gate(GateKind.GLOBAL_PHASE, target=0, param_slot=circ.num_params)
    return GateCircuit(
        num_qubits=circ.num_qubits,
        gates=circ.gates + (phase,),
        num_params=circ.num_params + 1,
    )


def identity_circuit(q: int, num_params: int = 0) -> GateCircuit:
    """A gate-free circuit (the identity) that still accepts `num_params` parameters."""
    return GateCircuit(num_qubits=q, gates=(), num_params=num_params)


def gate_counts(circ: GateCircuit) -> Dict[str, int]:
    """Gate tally by kind name."""
    return dict(Counter(gate.kind.value for gate in circ.gates))


def circuit_document(circ: GateCircuit) -> CircuitDocument:
    """Serializable description of a circuit (for debugging and resource reports)."""
    return CircuitDocument(
        num_qubits=circ.num_qubits,
        num_params=circ.num_params,
        gates=[
            GateDocument(
                kind=gate.kind.value,
                target=gate.target,
                control=gate.control,
                param_slot=gate.param_slot,
            )
            for gate in circ.gates
        ],
    )


def circuit_from_document(doc: CircuitDocument) -> GateCircuit:
    """
    Rebuild a circuit from its document.

    Raises:
        CircuitError: If the document violates a circuit invariant
    """
    try:
        gates = tuple(
            Gate(
                kind=GateKind(g.kind),
                target=g.target,
                control=g.control,
                param_slot=g.param_slot,
            )
            for g in doc.gates
        )
        return GateCircuit(num_qubits=doc.num_qubits, gates=gates, num_params=doc.num_params)
    except ValueError as e:
        raise CircuitError(f"invalid circuit document: {e}")


def circuit_json(circ: GateCircuit, indent: Optional[int] = 2) -> str:
    """JSON text of circuit_document(circ)."""
    return circuit_document(circ).model_dump_json(indent=indent)
