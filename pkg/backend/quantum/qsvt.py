"""
Polynomial transformation of the LCU mixer.

P_c(M) = c_0 I + c_1 M + ... + c_d M^d is evaluated matrix-free by power
accumulation: v_0 = state, v_{k+1} = M v_k, result = sum_k c_k v_k. All
intermediate powers are kept because the gradient pass reuses them.

The trained polynomial is unconstrained. Hardware feasibility is reported
after the fact through polynomial_sup_norm and the two parity branches;
QSVT phase angles are never computed, and the phased circuit exists only
as the structural template consumed by the resource estimator.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from app.config.settings import settings
from backend.quantum.circuits import run_circuit
from backend.quantum.lcu import (
    BlockEncodingSpec,
    LcuError,
    apply_m,
    dense_mixer,
    effective_coefficients,
    mix_batch,
)
from backend.quantum.qstate import zero_state
from backend.quantum.types import DenseOperator, GateCircuit, StateVector


logger = logging.getLogger(__name__)

# Largest n^d enumerated by the skip-gram oracle
SKIPGRAM_BUDGET = 100_000


class PolynomialError(Exception):
    """Raised when a polynomial transform cannot be evaluated."""
    pass


@dataclass
class PolynomialSpec:
    """Real coefficients c_0..c_d, lowest degree first."""
    coefficients: np.ndarray

    def __post_init__(self):
        """Require degree >= 1 and finite coefficients."""
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if self.coefficients.ndim != 1 or self.coefficients.size < 2:
            raise ValueError("a polynomial needs coefficients c_0..c_d with d >= 1")
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("polynomial coefficients must be finite")

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    @classmethod
    def identity_map(cls, degree: int) -> "PolynomialSpec":
        """P(x) = x padded to `degree`."""
        c = np.zeros(degree + 1)
        c[1] = 1.0
        return cls(c)

    @classmethod
    def constant_one(cls, degree: int) -> "PolynomialSpec":
        """P(x) = 1 padded to `degree`."""
        c = np.zeros(degree + 1)
        c[0] = 1.0
        return cls(c)


def polynomial_powers(poly: PolynomialSpec, spec: BlockEncodingSpec, state: StateVector) -> List[StateVector]:
    """
    The power sequence v_0 = state, v_{k+1} = M v_k for k < d.

    Returns:
        List[StateVector]: d + 1 states
    """
    powers = [state.copy()]
    for _ in range(poly.degree):
        powers.append(apply_m(spec, powers[-1]))
    return powers


def apply_polynomial(poly: PolynomialSpec, spec: BlockEncodingSpec, state: StateVector) -> StateVector:
    """
    P_c(M)|state> using d applications of M.

    Raises:
        LcuError: On register mismatch
    """
    powers = polynomial_powers(poly, spec, state)
    out = np.zeros_like(state.amplitudes)
    for c_k, v_k in zip(poly.coefficients, powers):
        out = out + c_k * v_k.amplitudes
    return StateVector(state.num_qubits, out)


def apply_polynomial_batch(
    coefficients: np.ndarray,
    circuit: GateCircuit,
    params: np.ndarray,
    b: np.ndarray,
    states: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Batched P_c(M) over B register columns, each with its own token angles.

    Args:
        coefficients: (d+1,) real coefficients
        circuit: Shared token circuit layout
        params: (P, B, n) token angles per column
        b: (n,) effective LCU coefficients
        states: (2^q, B) input columns

    Returns:
        Tuple[np.ndarray, np.ndarray]: (result (2^q, B), powers (d+1, 2^q, B))
    """
    degree = coefficients.size - 1
    powers = np.empty((degree + 1,) + states.shape, dtype=np.complex128)
    powers[0] = states
    for k in range(degree):
        powers[k + 1] = mix_batch(circuit, params, b, powers[k])
    result = np.einsum("k,kxb->xb", coefficients.astype(np.complex128), powers)
    return result, powers


def parity_split(poly: PolynomialSpec) -> Tuple[PolynomialSpec, PolynomialSpec]:
    """
    (P_odd, P_even), each zero-padded to the input degree.

    A degree-1 even part is (c_0, 0) and still a valid PolynomialSpec.
    """
    c = poly.coefficients
    odd = np.where(np.arange(c.size) % 2 == 1, c, 0.0)
    even = np.where(np.arange(c.size) % 2 == 0, c, 0.0)
    return PolynomialSpec(odd), PolynomialSpec(even)


def parity_branches(
    poly: PolynomialSpec,
    spec: BlockEncodingSpec,
    state: StateVector,
) -> Tuple[StateVector, StateVector]:
    """
    P_odd(M)|state> and P_even(M)|state>, the two branches combined on hardware.

    Their sum equals apply_polynomial(poly, spec, state).
    """
    odd, even = parity_split(poly)
    powers = polynomial_powers(poly, spec, state)
    branches = []
    for part in (odd, even):
        out = np.zeros_like(state.amplitudes)
        for c_k, v_k in zip(part.coefficients, powers):
            out = out + c_k * v_k.amplitudes
        branches.append(StateVector(state.num_qubits, out))
    return branches[0], branches[1]


def skipgram_expansion_oracle(
    poly: PolynomialSpec,
    spec: BlockEncodingSpec,
    state: StateVector,
) -> StateVector:
    """
    P_c(M)|state> by explicit enumeration of every ordered token tuple.

    Computes c_0|state> + sum_k c_k sum over (alpha_1..alpha_k) of
    b_{alpha_1}...b_{alpha_k} U_{alpha_1}...U_{alpha_k}|state>. Verification
    use only.

    Raises:
        PolynomialError: If n^d exceeds SKIPGRAM_BUDGET
    """
    n, d = spec.n, poly.degree
    if n**d > SKIPGRAM_BUDGET:
        raise PolynomialError(f"n^d = {n}^{d} exceeds the enumeration budget {SKIPGRAM_BUDGET}")
    if state.num_qubits != spec.num_qubits:
        raise LcuError(
            f"{state.num_qubits}-qubit state does not fit a {spec.num_qubits}-qubit mixer"
        )

    b = effective_coefficients(spec.coeffs)
    out = poly.coefficients[0] * state.amplitudes
    for k in range(1, d + 1):
        term = np.zeros_like(state.amplitudes)
        for alpha in itertools.product(range(n), repeat=k):
            weight = np.prod(b[list(alpha)])
            image = state.amplitudes
            # rightmost unitary acts first
            for j in reversed(alpha):
                image = run_circuit(spec.token_circuits[j], spec.token_params[j], image)
            term = term + weight * image
        out = out + poly.coefficients[k] * term
    return StateVector(state.num_qubits, out)


def polynomial_values(poly: PolynomialSpec, x: np.ndarray) -> np.ndarray:
    """P(x) elementwise."""
    return np.polynomial.polynomial.polyval(x, poly.coefficients)


def polynomial_sup_norm(poly: PolynomialSpec, grid_points: int = 1001) -> float:
    """
    max |P(x)| over a uniform grid on [-1, 1] (endpoints included).

    Raises:
        PolynomialError: If grid_points < 2
    """
    if grid_points < 2:
        raise PolynomialError(f"grid_points must be >= 2, got {grid_points}")
    x = np.linspace(-1.0, 1.0, grid_points)
    return float(np.max(np.abs(polynomial_values(poly, x))))


def final_postselection_prob(poly: PolynomialSpec, spec: BlockEncodingSpec) -> float:
    """p = ||P_c(M)|0>||^2."""
    image = apply_polynomial(poly, spec, zero_state(spec.num_qubits))
    return float(np.vdot(image.amplitudes, image.amplitudes).real)


def dense_polynomial(poly: PolynomialSpec, spec: BlockEncodingSpec) -> DenseOperator:
    """Dense c_0 I + c_1 M + ... + c_d M^d (verification oracle)."""
    mixer = dense_mixer(spec).entries
    total = np.zeros_like(mixer)
    power = np.eye(mixer.shape[0], dtype=np.complex128)
    for c_k in poly.coefficients:
        total += c_k * power
        power = mixer @ power
    return DenseOperator(mixer.shape[0], total)


def block_encoding_singular_values(spec: BlockEncodingSpec) -> np.ndarray:
    """
    Singular values of the dense mixer M, descending.

    Raises:
        LcuError: If the register exceeds the dense limit
    """
    if spec.num_qubits > settings.dense_qubit_limit:
        raise LcuError(f"{spec.num_qubits} qubits exceed the dense limit")
    return np.linalg.svd(dense_mixer(spec).entries, compute_uv=False)


@dataclass(frozen=True)
class QsvtStep:
    """One element of the alternating QSVT sequence."""
    kind: str
    index: int


BLOCK_ENCODING = "U_M"
BLOCK_ENCODING_ADJOINT = "U_M_dagger"
PROJECTOR_PHASE = "projector_phase"


def qsvt_sequence_template(degree: int) -> List[QsvtStep]:
    """
    Structural QSVT sequence for a degree-d polynomial, angles left symbolic.

    Alternates U_M and U_M^dagger, each followed by a projector-controlled
    phase: (U_M, Pi_1, U_M^dagger, Pi_2, U_M, Pi_3, ...). d applications and
    d projectors in total.

    Raises:
        PolynomialError: If degree < 1
    """
    if degree < 1:
        raise PolynomialError(f"degree must be >= 1, got {degree}")
    steps = []
    for k in range(1, degree + 1):
        kind = BLOCK_ENCODING if k % 2 == 1 else BLOCK_ENCODING_ADJOINT
        steps.append(QsvtStep(kind, k))
        steps.append(QsvtStep(PROJECTOR_PHASE, k))
    return steps
