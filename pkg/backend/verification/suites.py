"""
Property suites run by the `verify` command.

Each property compares a production code path against an independent
oracle (dense matrices, explicit enumeration, closed-form recounts or
finite differences) on seeded random instances. The `small` scale runs a
reduced number of instances for a quick check; `full` runs the acceptance
counts.

The coefficient function used on the matrix-free side of the block
encoding check is injectable, so a deliberately wrong formula can be
shown to fail it.

Usage:
    results = run_suites(Scale.SMALL, seed=0)
    all(r.passed for r in results)
"""

import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional

import numpy as np

from app.schemas import ResourceQuery
from backend.model.grad import finite_difference_check
from backend.model.quixer import (
    QuixerModel,
    block_encoding_for,
    evaluate_block_encoding,
    forward,
    init_model,
)
from backend.quantum.circuits import (
    apply_adjoint,
    apply_circuit,
    circuit14,
    dense_matrix,
    run_circuit,
    with_global_phase,
)
from backend.quantum.lcu import (
    BlockEncodingSpec,
    LcuCoefficients,
    build_explicit_block_encoding,
    effective_coefficients,
    postselection_prob_m,
    postselection_prob_m_expansion,
    top_left_block,
)
from backend.quantum.qsvt import (
    PolynomialSpec,
    apply_polynomial,
    block_encoding_singular_values,
    dense_polynomial,
    final_postselection_prob,
    polynomial_sup_norm,
    skipgram_expansion_oracle,
)
from backend.quantum.types import Gate, GateCircuit, GateKind, StateVector
from backend.resources.estimator import estimate, qubit_count


logger = logging.getLogger(__name__)

CoefficientFn = Callable[[LcuCoefficients], np.ndarray]


class Scale(str, Enum):
    """How many random instances each property draws."""
    SMALL = "small"
    FULL = "full"


@dataclass
class PropertyResult:
    """Outcome of one property check."""
    name: str
    passed: bool
    detail: str
    seconds: float


_INSTANCES = {
    Scale.SMALL: {"lemma": 20, "polynomial": 10, "postselection": 20, "circuit": 10, "model": 10, "fd": 5},
    Scale.FULL: {"lemma": 100, "polynomial": 50, "postselection": 100, "circuit": 50, "model": 100, "fd": 20},
}

_ROTATIONS = (GateKind.RX, GateKind.RY, GateKind.RZ)
_CONTROLLED = (GateKind.CRX, GateKind.CRY, GateKind.CRZ)


class VerificationError(Exception):
    """Raised when a property check finds a deviation beyond tolerance."""
    pass


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise VerificationError(message)


def random_circuit(rng: np.random.Generator, q: int, num_gates: int = 12) -> GateCircuit:
    """Random gate list over every gate kind (controlled kinds need q >= 2)."""
    gates = []
    slot = 0
    for _ in range(num_gates):
        choice = rng.integers(0, 4) if q >= 2 else rng.integers(0, 2) * 3
        target = int(rng.integers(0, q))
        if choice == 0:
            gates.append(Gate(_ROTATIONS[rng.integers(0, 3)], target, param_slot=slot))
            slot += 1
        elif choice == 1:
            control = int((target + rng.integers(1, q)) % q)
            gates.append(Gate(_CONTROLLED[rng.integers(0, 3)], target, control, slot))
            slot += 1
        elif choice == 2:
            control = int((target + rng.integers(1, q)) % q)
            gates.append(Gate(GateKind.CX, target, control))
        else:
            gates.append(Gate(GateKind.GLOBAL_PHASE, target, param_slot=slot))
            slot += 1
    return GateCircuit(q, tuple(gates), slot)


def random_state(rng: np.random.Generator, q: int) -> StateVector:
    """Haar-ish random normalized state."""
    amplitudes = rng.normal(size=1 << q) + 1j * rng.normal(size=1 << q)
    return StateVector(q, amplitudes / np.linalg.norm(amplitudes))


def random_spec(rng: np.random.Generator, q: int, n: int, shared: Optional[bool] = None) -> BlockEncodingSpec:
    """
    Random BlockEncodingSpec.

    shared=True uses one circuit-14 layout for every token (q >= 2), False
    gives every token its own random circuit, None picks at random.
    """
    if shared is None:
        shared = q >= 2 and bool(rng.integers(0, 2))
    coeffs = LcuCoefficients(rng.uniform(-1.5, 1.5, size=n), rng.uniform(-np.pi, np.pi, size=n))
    if shared:
        circ = circuit14(q, 1)
        return BlockEncodingSpec.shared(coeffs, circ, rng.uniform(-np.pi, np.pi, size=(n, circ.num_params)))
    num_gates = int(rng.integers(4, 10))
    circuits = []
    for _ in range(n):
        circuits.append(_random_circuit_with_params(rng, q, num_gates, 6))
    return BlockEncodingSpec(coeffs, circuits, rng.uniform(-np.pi, np.pi, size=(n, 6)))


def _random_circuit_with_params(rng: np.random.Generator, q: int, num_gates: int, num_params: int) -> GateCircuit:
    # Same parameter count for every token; slots reused cyclically
    circ = random_circuit(rng, q, num_gates)
    gates = tuple(
        Gate(g.kind, g.target, g.control, None if g.param_slot is None else g.param_slot % num_params)
        for g in circ.gates
    )
    return GateCircuit(q, gates, num_params)


def random_model(rng: np.random.Generator, q: int = 3, n: int = 4, d: int = 3, vocab: int = 11) -> QuixerModel:
    """Small model with a random polynomial."""
    model = init_model(vocab, q, n, d, 1, embed_dim=8, head_hidden=10, seed=int(rng.integers(0, 2**31)))
    return model.replace_tensors(poly_coefficients=rng.normal(size=d + 1))


def _matrix_free_block(spec: BlockEncodingSpec, coefficient_fn: CoefficientFn) -> np.ndarray:
    b = coefficient_fn(spec.coeffs)
    dim = 1 << spec.num_qubits
    identity = np.eye(dim, dtype=np.complex128)
    total = np.zeros((dim, dim), dtype=np.complex128)
    for j, (circ, params) in enumerate(zip(spec.token_circuits, spec.token_params)):
        total += b[j] * run_circuit(circ, params, identity)
    return total


def check_block_encoding(rng, count: int, coefficient_fn: CoefficientFn = effective_coefficients) -> str:
    worst = 0.0
    for _ in range(count):
        q = int(rng.integers(1, 4))
        n = int(rng.choice([2, 4, 8]))
        spec = random_spec(rng, q, n)
        explicit = top_left_block(build_explicit_block_encoding(spec), q)
        worst = max(worst, float(np.max(np.abs(explicit - _matrix_free_block(spec, coefficient_fn)))))
    _require(worst <= 1e-10, f"max deviation {worst:.3e}")
    return f"{count} instances, max deviation {worst:.2e}"


def check_polynomial_identity(rng, count: int) -> str:
    worst = 0.0
    for _ in range(count):
        q = int(rng.integers(1, 4))
        n = int(rng.integers(1, 5))
        d = int(rng.integers(1, 4))
        spec = random_spec(rng, q, n)
        poly = PolynomialSpec(rng.normal(size=d + 1))
        state = random_state(rng, q)
        fast = apply_polynomial(poly, spec, state).amplitudes
        dense = dense_polynomial(poly, spec).entries @ state.amplitudes
        enumerated = skipgram_expansion_oracle(poly, spec, state).amplitudes
        worst = max(worst, float(np.max(np.abs(fast - dense))), float(np.max(np.abs(fast - enumerated))))
    _require(worst <= 1e-10, f"max deviation {worst:.3e}")
    return f"{count} instances, max deviation {worst:.2e}"


def check_postselection(rng, count: int) -> str:
    worst = 0.0
    bounded = 0
    for _ in range(count):
        q = int(rng.integers(1, 4))
        n = int(rng.integers(1, 6))
        spec = random_spec(rng, q, n)
        direct = postselection_prob_m(spec)
        worst = max(worst, abs(direct - postselection_prob_m_expansion(spec)))
        _require(-1e-12 <= direct <= 1 + 1e-10, f"p_M = {direct}")

        poly = PolynomialSpec(rng.normal(size=int(rng.integers(2, 5))))
        poly = PolynomialSpec(poly.coefficients / max(1.0, polynomial_sup_norm(poly, 2001)))
        p = final_postselection_prob(poly, spec)
        _require(p >= 0.0, f"negative postselection probability {p}")
        singular = block_encoding_singular_values(spec)
        if singular.max() <= 1.0 and polynomial_sup_norm(poly, 2001) <= 1.0:
            bounded += 1
            _require(p <= 1 + 1e-8, f"p = {p} exceeds 1 with a bounded polynomial")
    _require(worst <= 1e-12, f"expansion deviation {worst:.3e}")
    return f"{count} instances, expansion deviation {worst:.2e}, {bounded} bounded checks"


def check_circuits(rng, count: int) -> str:
    worst = 0.0
    for _ in range(count):
        q = int(rng.integers(1, 6))
        circ = random_circuit(rng, q, int(rng.integers(1, 20)))
        params = rng.uniform(-np.pi, np.pi, size=circ.num_params)
        state = random_state(rng, q)
        out = apply_circuit(circ, params, state)
        matrix = dense_matrix(circ, params).entries
        worst = max(
            worst,
            float(np.max(np.abs(out.amplitudes - matrix @ state.amplitudes))),
            abs(out.norm() - state.norm()),
            float(np.max(np.abs(apply_adjoint(circ, params, out).amplitudes - state.amplitudes))),
            float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(1 << q)))),
        )
    _require(worst <= 1e-10, f"max deviation {worst:.3e}")
    for q in range(2, 7):
        for layers in range(1, 5):
            count = circuit14(q, layers).num_params
            _require(count == 4 * layers * q, f"circuit 14 with q={q}, layers={layers} has {count} parameters")
    _require(circuit14(6, 4).num_params == 96, "circuit 14 with q=6, layers=4 is not 96 parameters")
    return f"{count} instances, max deviation {worst:.2e}; circuit-14 counts ok"


def check_model_invariances(rng, count: int) -> str:
    worst = 0.0
    for _ in range(count):
        model = random_model(rng)
        context = rng.integers(0, model.vocab_size, size=model.window)
        logits, trace = forward(model, context)
        _require(np.all(np.abs(trace.expectations) <= 1 + 1e-10), "readout out of [-1, 1]")

        spec = block_encoding_for(model, context)

        # exp(i alpha) U_j with gamma_j - alpha
        alpha = np.zeros(spec.n)
        alpha[int(rng.integers(0, spec.n))] = rng.uniform(-np.pi, np.pi)
        phased = BlockEncodingSpec.shared(
            LcuCoefficients(spec.coeffs.raw_amplitudes, spec.coeffs.phases - alpha),
            with_global_phase(spec.token_circuits[0]),
            np.column_stack([spec.token_params, alpha]),
        )
        shifted, _ = evaluate_block_encoding(model, phased)

        perm = rng.permutation(spec.n)
        permuted = BlockEncodingSpec.shared(
            LcuCoefficients(spec.coeffs.raw_amplitudes[perm], spec.coeffs.phases[perm]),
            spec.token_circuits[0],
            spec.token_params[perm],
        )
        reordered, _ = evaluate_block_encoding(model, permuted)
        worst = max(worst, float(np.max(np.abs(shifted - logits))), float(np.max(np.abs(reordered - logits))))
    _require(worst <= 1e-10, f"max logit deviation {worst:.3e}")
    return f"{count} forward passes, max logit deviation {worst:.2e}"


def check_gradients(rng, samples: int) -> str:
    model = random_model(rng)
    contexts = rng.integers(0, model.vocab_size, size=(6, model.window))
    targets = rng.integers(0, model.vocab_size, size=6)
    report = finite_difference_check(model, contexts, targets, 1e-5, samples, int(rng.integers(0, 2**31)))
    _require(report.passed(1e-4), "; ".join(
        f"{s.name}={s.max_rel_error:.2e}" for s in report.segments if s.max_rel_error > 1e-4
    ))
    return f"{len(report.segments)} segments x {samples} samples, max rel error {report.max_rel_error:.2e}"


def check_resources(rng, count: int) -> str:
    base = ResourceQuery(q=6, n=32, l=4, d=3)
    _require(qubit_count(base) == 14, f"PTB instance: {qubit_count(base)} qubits, expected 14")
    ancilla = qubit_count(base.model_copy(update={"use_ancilla_select": True}))
    _require(ancilla == 17, f"PTB instance with ancilla select: {ancilla} qubits, expected 17")
    for _ in range(count):
        query = ResourceQuery(
            q=int(rng.integers(1, 10)),
            n=int(rng.integers(2, 200)),
            l=int(rng.integers(1, 6)),
            d=int(rng.integers(1, 6)),
        )
        wider = query.model_copy(update={"n": 4 * query.n})
        _require(
            estimate(wider).control_qubits == estimate(query).control_qubits + 2,
            f"quadrupling n={query.n} did not add two control qubits",
        )
        deeper = query.model_copy(update={"d": 2 * query.d})
        _require(
            estimate(deeper).gates_select == 2 * estimate(query).gates_select,
            f"doubling d={query.d} did not double the select gates",
        )
    return f"{count} queries"


def run_suites(
    scale: Scale = Scale.SMALL,
    seed: int = 0,
    coefficient_fn: Optional[CoefficientFn] = None,
) -> List[PropertyResult]:
    """
    Run every property and collect pass/fail results (never raises).

    Args:
        scale: SMALL or FULL instance counts
        seed: Seed for all random instances
        coefficient_fn: Replacement for effective_coefficients on the
            matrix-free side of the block-encoding check
    """
    scale = Scale(scale)
    counts = _INSTANCES[scale]
    coefficient_fn = coefficient_fn or effective_coefficients
    checks = [
        ("circuit_oracle", lambda rng: check_circuits(rng, counts["circuit"])),
        ("block_encoding_equivalence", lambda rng: check_block_encoding(rng, counts["lemma"], coefficient_fn)),
        ("polynomial_skipgram_identity", lambda rng: check_polynomial_identity(rng, counts["polynomial"])),
        ("postselection_identity", lambda rng: check_postselection(rng, counts["postselection"])),
        ("model_invariances", lambda rng: check_model_invariances(rng, counts["model"])),
        ("gradient_finite_difference", lambda rng: check_gradients(rng, counts["fd"])),
        ("resource_arithmetic", lambda rng: check_resources(rng, counts["circuit"])),
    ]

    results = []
    for index, (name, check) in enumerate(checks):
        rng = np.random.default_rng([seed, index])
        started = time.perf_counter()
        try:
            detail = check(rng)
            passed = True
        except Exception as e:
            detail = f"{type(e).__name__}: {e}"
            passed = False
        elapsed = time.perf_counter() - started
        level = logging.INFO if passed else logging.ERROR
        logger.log(level, f"[VERIFY] {name}: {'PASS' if passed else 'FAIL'} ({elapsed:.2f}s) {detail}")
        results.append(PropertyResult(name, passed, detail, elapsed))
    return results
