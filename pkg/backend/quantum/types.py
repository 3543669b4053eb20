"""
Data structures for statevector simulation.

These types carry amplitudes, dense operators and gate lists without any
simulation logic. Qubit k addresses bit k of a basis index (little-endian),
so |6> on three qubits is |110> with qubits 1 and 2 set.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np


class GateKind(str, Enum):
    """Primitive gate kinds understood by the simulator."""
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CRX = "CRX"
    CRY = "CRY"
    CRZ = "CRZ"
    GLOBAL_PHASE = "GlobalPhase"
    CX = "CX"

    @property
    def is_controlled(self) -> bool:
        return self in (GateKind.CRX, GateKind.CRY, GateKind.CRZ, GateKind.CX)

    @property
    def is_parameterised(self) -> bool:
        return self is not GateKind.CX


class PauliAxis(str, Enum):
    """Single-qubit Pauli observable axis."""
    X = "X"
    Y = "Y"
    Z = "Z"


@dataclass
class StateVector:
    """
    Dense complex amplitude vector over q qubits.

    Amplitudes are stored as a complex128 array of length 2^q. States are
    value-like: operations return new instances and never alias the input
    amplitudes. Intermediate states (for example M|0>) may be unnormalized.
    """
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        """Validate register size and amplitude length."""
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise ValueError(
                f"amplitudes must have length 2^{self.num_qubits}, "
                f"got shape {self.amplitudes.shape}"
            )

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> "StateVector":
        """Return a unit-norm copy; raises on a zero vector."""
        norm = self.norm()
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.num_qubits, self.amplitudes / norm)

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())


@dataclass
class DenseOperator:
    """Square complex matrix on a power-of-two dimension (verification scale only)."""
    dim: int
    entries: np.ndarray

    def __post_init__(self):
        """Validate shape and power-of-two dimension."""
        if self.dim < 1 or self.dim & (self.dim - 1):
            raise ValueError(f"dim must be a power of two, got {self.dim}")
        self.entries = np.asarray(self.entries, dtype=np.complex128)
        if self.entries.shape != (self.dim, self.dim):
            raise ValueError(
                f"entries must be {self.dim}x{self.dim}, got {self.entries.shape}"
            )

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def adjoint(self) -> "DenseOperator":
        return DenseOperator(self.dim, self.entries.conj().T)

    def apply(self, state: StateVector) -> StateVector:
        if state.dim != self.dim:
            raise ValueError(f"operator dim {self.dim} != state dim {state.dim}")
        return StateVector(state.num_qubits, self.entries @ state.amplitudes)


@dataclass(frozen=True)
class Gate:
    """
    One primitive gate.

    Controlled kinds act on `target` only when `control` is |1>.
    Parameterised kinds read their angle from params[param_slot].
    """
    kind: GateKind
    target: int
    control: Optional[int] = None
    param_slot: Optional[int] = None

    def __post_init__(self):
        """Validate control/parameter presence against the gate kind."""
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.target < 0:
            raise ValueError("target must be a non-negative qubit index")
        if kind.is_controlled and self.control is None:
            raise ValueError(f"{kind.value} requires a control qubit")
        if not kind.is_controlled and self.control is not None:
            raise ValueError(f"{kind.value} takes no control qubit")
        if self.control is not None and self.control == self.target:
            raise ValueError("control and target must differ")
        if kind.is_parameterised and self.param_slot is None:
            raise ValueError(f"{kind.value} requires a param_slot")
        if not kind.is_parameterised and self.param_slot is not None:
            raise ValueError(f"{kind.value} takes no param_slot")


@dataclass(frozen=True)
class GateCircuit:
    """Ordered gate list over q qubits reading a real parameter vector."""
    num_qubits: int
    gates: Tuple[Gate, ...] = field(default_factory=tuple)
    num_params: int = 0

    def __post_init__(self):
        """Validate qubit indices and parameter slots."""
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        for gate in self.gates:
            qubits = [gate.target] + ([gate.control] if gate.control is not None else [])
            if any(q >= self.num_qubits for q in qubits):
                raise ValueError(
                    f"{gate.kind.value} touches qubit {max(qubits)} "
                    f"outside a {self.num_qubits}-qubit circuit"
                )
            if gate.param_slot is not None and gate.param_slot >= self.num_params:
                raise ValueError(
                    f"param_slot {gate.param_slot} >= num_params {self.num_params}"
                )


@dataclass(frozen=True)
class PauliObservable:
    """Single-qubit Pauli operator on one qubit of the register."""
    axis: PauliAxis
    qubit: int

    def __post_init__(self):
        object.__setattr__(self, "axis", PauliAxis(self.axis))
        if self.qubit < 0:
            raise ValueError("qubit must be a non-negative index")
