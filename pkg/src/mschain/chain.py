"""The three-stage measurement chain: system S, detector D, observer O.

The object system starts in a two-component superposition (or the matching
probabilistic mixture), the detector and observer start in their symmetric
ready states, and two successive premeasurement unitaries correlate the
pointer bases down the chain. Restriction maps then extract what the observer
factor can see, and a simple product-tag environment model implements
decoherence of the chain state.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapacityError,
    DecompositionError,
    PreconditionError,
    UsageError,
    ValidationError,
)
from .linalg import (
    DEFAULT_MAX_DIM,
    IDENTITY_2,
    PAULI_X,
    PAULI_Y,
    TensorLayout,
    as_complex_array,
    partial_trace,
    pure_density,
    tensor_product,
    unitary_exp,
    validate_state_vector,
)

# Pointer eigenvalues of the observer's internal pointer observable.
POINTER_EIGENVALUES = (0.5, -0.5)

BASIS_1 = np.array([1.0, 0.0], dtype=complex)
BASIS_2 = np.array([0.0, 1.0], dtype=complex)
# Symmetric ready state of an apparatus factor before it measures anything.
READY_STATE = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)

_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)

# Net-effect premeasurement unitary on (control, apparatus): conditioned on
# control basis state i it rotates the ready state onto pointer state i.
PREMEASURE_UNITARY = np.zeros((4, 4), dtype=complex)
PREMEASURE_UNITARY[:2, :2] = _HADAMARD
PREMEASURE_UNITARY[2:, 2:] = PAULI_X @ _HADAMARD

# Coupling*duration value at which the Hamiltonian path reproduces the
# net-effect unitary exactly.
TUNED_COUPLING_DURATION = 1.0

READY_FIDELITY_TOL = 1e-10
BRANCH_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class Scenario:
    """Complete description of one chain experiment."""

    a1: complex
    a2: complex
    input_kind: str = "pure"
    n_env: int = 0
    env_overlap: float = 1.0
    seed: int = 42
    trials: int = 100_000

    def __post_init__(self):
        if self.input_kind not in ("pure", "gemenge"):
            raise ValidationError(f"input_kind must be 'pure' or 'gemenge', got {self.input_kind!r}")
        norm_sq = abs(self.a1) ** 2 + abs(self.a2) ** 2
        if abs(norm_sq - 1.0) > 1e-10:
            raise ValidationError(
                f"amplitudes not normalized: |a1|^2+|a2|^2 deviates from 1 by {norm_sq - 1.0!r}"
            )
        if self.n_env < 0:
            raise ValidationError("n_env must be nonnegative")
        if not 0.0 <= self.env_overlap <= 1.0:
            raise ValidationError("env_overlap must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.trials < 1:
            raise ValidationError("trials must be a positive integer")

    @property
    def probabilities(self) -> tuple[float, float]:
        return (abs(self.a1) ** 2, abs(self.a2) ** 2)


def scenario_digest(scenario: Scenario) -> str:
    """Content hash of a scenario, stable across runs and platforms."""
    payload = {
        "a1": [scenario.a1.real, scenario.a1.imag],
        "a2": [scenario.a2.real, scenario.a2.imag],
        "input_kind": scenario.input_kind,
        "n_env": scenario.n_env,
        "env_overlap": scenario.env_overlap,
        "seed": scenario.seed,
        "trials": scenario.trials,
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


@dataclass(frozen=True)
class MSState:
    """A pure state of the composite chain together with its factor layout."""

    vector: np.ndarray
    layout: TensorLayout

    def __post_init__(self):
        vec = validate_state_vector(self.vector)
        object.__setattr__(self, "vector", vec)
        if vec.shape[0] != self.layout.total_dim:
            raise ValidationError(
                f"vector dim {vec.shape[0]} does not match layout dim {self.layout.total_dim}"
            )

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def density(self) -> np.ndarray:
        return pure_density(self.vector)

    def reduced(self, keep) -> np.ndarray:
        return partial_trace(self.density(), self.layout, keep)


@dataclass(frozen=True)
class Gemenge:
    """Explicit probabilistic mixture of pure states.

    Unlike its density matrix, a gemenge remembers which pure states occur
    with which preparation probabilities. Branch states are MSState values or
    bare state vectors.
    """

    branches: tuple[tuple[object, float], ...]
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        total = sum(p for _, p in self.branches)
        if abs(total - 1.0) > 1e-10:
            raise ValidationError(f"branch probabilities sum to {total!r}, not 1")
        if any(p <= 0 for _, p in self.branches):
            raise ValidationError("branch probabilities must be positive")

    @property
    def layout(self) -> TensorLayout | None:
        layouts = {b.layout for b, _ in self.branches if isinstance(b, MSState)}
        if not layouts:
            return None
        if len(layouts) > 1:
            raise ValidationError("gemenge branches carry inconsistent layouts")
        return next(iter(layouts))

    def density(self) -> np.ndarray:
        out = None
        for state, p in self.branches:
            vec = state.vector if isinstance(state, MSState) else as_complex_array(state)
            term = p * pure_density(vec)
            out = term if out is None else out + term
        return out


def _branch_vector(state) -> np.ndarray:
    return state.vector if isinstance(state, MSState) else as_complex_array(state)


def make_gemenge(branches, notes=()) -> Gemenge:
    """Build a gemenge, merging duplicate branches and dropping negligible ones."""
    notes = list(notes)
    kept: list[list] = []
    for state, p in branches:
        if p < BRANCH_PROB_FLOOR:
            notes.append(f"dropped branch with probability {p:.3e} below floor")
            continue
        vec = _branch_vector(state)
        for entry in kept:
            other = _branch_vector(entry[0])
            if other.shape == vec.shape and abs(np.vdot(other, vec)) ** 2 >= 1.0 - 1e-12:
                entry[1] += p
                notes.append("merged two branches with coinciding states")
                break
        else:
            kept.append([state, p])
    if not kept:
        raise ValidationError("gemenge has no branch above the probability floor")
    total = sum(p for _, p in kept)
    if abs(total - 1.0) > 1e-10:
        notes.append(f"renormalized branch probabilities by {total!r}")
    return Gemenge(tuple((s, p / total) for s, p in kept), tuple(notes))


@dataclass(frozen=True)
class PointerBasis:
    """The preferred basis of one chain factor, with pointer eigenvalues."""

    subsystem: str
    basis_states: tuple[np.ndarray, np.ndarray] = (BASIS_1, BASIS_2)
    eigenvalues: tuple[float, float] = POINTER_EIGENVALUES

    def __post_init__(self):
        b1 = as_complex_array(self.basis_states[0])
        b2 = as_complex_array(self.basis_states[1])
        object.__setattr__(self, "basis_states", (b1, b2))
        gram = np.array([[np.vdot(b1, b1), np.vdot(b1, b2)], [np.vdot(b2, b1), np.vdot(b2, b2)]])
        if np.max(np.abs(gram - np.eye(2))) > 1e-12:
            raise ValidationError("pointer basis states are not orthonormal within 1e-12")


@dataclass(frozen=True)
class HamiltonianSpec:
    """Coupling strength and interaction duration for the Hamiltonian path."""

    coupling: float
    duration: float

    @property
    def is_tuned(self) -> bool:
        return abs(self.coupling * self.duration - TUNED_COUPLING_DURATION) < 1e-12


@dataclass(frozen=True)
class CrosscheckResult:
    state: "MSState"
    fidelity_to_canonical: float
    tuned: bool
    diagnostic: str | None = None


def prepare_object_state(a1: complex, a2: complex) -> np.ndarray:
    """Two-component superposition of the object system's measured eigenstates."""
    vec = np.array([a1, a2], dtype=complex)
    return validate_state_vector(vec)


def prepare_gemenge(a1: complex, a2: complex) -> Gemenge:
    """Mixture of the object eigenstates with the squared-modulus probabilities."""
    validate_state_vector(np.array([a1, a2], dtype=complex))
    p1, p2 = abs(a1) ** 2, abs(a2) ** 2
    notes = []
    branches = []
    if p1 >= BRANCH_PROB_FLOOR:
        branches.append((BASIS_1.copy(), p1))
    else:
        notes.append("first amplitude vanishes; gemenge degenerates to a single pure state")
    if p2 >= BRANCH_PROB_FLOOR:
        branches.append((BASIS_2.copy(), p2))
    else:
        notes.append("second amplitude vanishes; gemenge degenerates to a single pure state")
    return make_gemenge(branches, notes)


def attach_factor(state: MSState, label: str, factor_state: np.ndarray,
                  max_dim: int = DEFAULT_MAX_DIM) -> MSState:
    """Tensor a fresh factor in its own pure state onto the right of the chain."""
    factor = validate_state_vector(factor_state)
    vec = tensor_product(state.vector, factor, max_dim=max_dim)
    return MSState(vec, state.layout.extended(label, factor.shape[0]))


def _apply_two_factor_unitary(state: MSState, u4: np.ndarray,
                              control: str, apparatus: str) -> MSState:
    layout = state.layout
    c = layout.position(control)
    a = layout.position(apparatus)
    if layout.dims[c] != 2 or layout.dims[a] != 2:
        raise UsageError("premeasurement acts on two-dimensional factors only")
    tensor = state.vector.reshape(layout.dims)
    moved = np.moveaxis(tensor, (c, a), (0, 1))
    rest = moved.shape[2:]
    block = moved.reshape(4, -1)
    block = u4 @ block
    moved = block.reshape((2, 2) + rest)
    tensor = np.moveaxis(moved, (0, 1), (c, a))
    return MSState(tensor.reshape(-1), layout)


def premeasure(state: MSState, control: str, apparatus: str,
               allow_any_apparatus_state: bool = False) -> MSState:
    """Entangle the apparatus pointer with the control factor's basis states.

    The apparatus must sit in its symmetric ready state; the unitary is only
    the tuned evolution from there. Pass `allow_any_apparatus_state=True` to
    push arbitrary inputs through the same unitary anyway.
    """
    if not allow_any_apparatus_state:
        rho_app = state.reduced((apparatus,))
        fidelity = float(np.real(READY_STATE.conj() @ rho_app @ READY_STATE))
        if fidelity <= 1.0 - READY_FIDELITY_TOL:
            raise PreconditionError(
                f"apparatus {apparatus!r} is not in the ready state "
                f"(fidelity {fidelity!r}); pass allow_any_apparatus_state=True to override"
            )
    return _apply_two_factor_unitary(state, PREMEASURE_UNITARY, control, apparatus)


def full_chain(scenario: Scenario):
    """Run the whole chain: object state in, final composite state out.

    Pure input yields the entangled three-factor state; gemenge input yields
    the gemenge of product chain states with the preparation probabilities.
    """
    if scenario.input_kind == "pure":
        return _chain_from_object_state(prepare_object_state(scenario.a1, scenario.a2))
    w = prepare_gemenge(scenario.a1, scenario.a2)
    branches = [(_chain_from_object_state(vec), p) for vec, p in w.branches]
    return make_gemenge(branches, w.notes)


def object_detector_state(a1: complex, a2: complex) -> MSState:
    """The entangled object-detector state after the first premeasurement."""
    ms = MSState(prepare_object_state(a1, a2), TensorLayout((("S", 2),)))
    ms = attach_factor(ms, "D", READY_STATE)
    return premeasure(ms, "S", "D")


def _chain_from_object_state(object_vec: np.ndarray) -> MSState:
    ms = MSState(object_vec, TensorLayout((("S", 2),)))
    ms = attach_factor(ms, "D", READY_STATE)
    ms = premeasure(ms, "S", "D")
    ms = attach_factor(ms, "O", READY_STATE)
    ms = premeasure(ms, "D", "O")
    return ms


def statistical_restriction(state, layout: TensorLayout | None = None) -> np.ndarray:
    """Reduced density matrix of the observer factor.

    Accepts an MSState, or a density matrix plus the layout describing it.
    """
    if isinstance(state, MSState):
        rho, layout = state.density(), state.layout
    else:
        if layout is None:
            raise UsageError("a bare density matrix needs an explicit layout")
        rho = as_complex_array(state)
    return partial_trace(rho, layout, ("O",))


def factorize_branch(state: MSState, tol: float = 1e-10) -> dict[str, np.ndarray]:
    """Split a product chain state into per-factor pure states.

    Raises PreconditionError when the state is entangled across any factor cut,
    i.e. when the product of the per-factor principal states fails to
    reconstruct the input within fidelity `tol`.
    """
    factors: dict[str, np.ndarray] = {}
    for label in state.layout.labels:
        rho = state.reduced((label,))
        _, vecs = np.linalg.eigh(rho)
        principal = vecs[:, -1]
        # fix the arbitrary eigenvector phase: largest component real positive
        k = int(np.argmax(np.abs(principal)))
        phase = principal[k] / abs(principal[k])
        factors[label] = principal / phase
    product = factors[state.layout.labels[0]]
    for label in state.layout.labels[1:]:
        product = np.kron(product, factors[label])
    fidelity = abs(np.vdot(product, state.vector)) ** 2
    if fidelity <= 1.0 - tol:
        raise PreconditionError(
            f"state is entangled across the factor cut (product fidelity {fidelity!r})"
        )
    return factors


def gemenge_restriction(w: Gemenge) -> Gemenge:
    """Branchwise restriction of a gemenge to the observer factor."""
    out = []
    for state, p in w.branches:
        if not isinstance(state, MSState):
            raise UsageError("gemenge restriction needs branches with factor layouts")
        factors = factorize_branch(state)
        if "O" not in factors:
            raise UsageError("branch layout has no observer factor")
        out.append((factors["O"], p))
    return make_gemenge(out, w.notes)


@dataclass(frozen=True)
class DecoherenceResult:
    state: MSState
    coherence_factor: float
    reduced_ms: np.ndarray


def decohere(state: MSState, n_env: int, eps: float,
             max_dim: int = DEFAULT_MAX_DIM) -> DecoherenceResult:
    """Entangle the chain with n_env two-level environment elements.

    Each element ends in one of two states whose mutual overlap is `eps`,
    keyed on the observer factor's pointer index. The reduced chain state then
    has its pointer-off-diagonal elements suppressed by eps**n_env, which is
    returned alongside the explicit partial trace over the environment.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValidationError("environment overlap eps must lie in [0, 1]")
    if n_env < 0:
        raise ValidationError("n_env must be nonnegative")
    new_dim = state.dim * 2**n_env
    if new_dim > max_dim:
        raise CapacityError(f"decohered dimension {new_dim} exceeds the maximum {max_dim}")

    factor = float(eps) ** n_env if n_env > 0 else 1.0
    if n_env == 0:
        return DecoherenceResult(state, factor, state.density())

    env_states = (
        np.array([1.0, 0.0], dtype=complex),
        np.array([eps, math.sqrt(max(0.0, 1.0 - eps * eps))], dtype=complex),
    )
    tags = []
    for env in env_states:
        tag = env
        for _ in range(n_env - 1):
            tag = np.kron(tag, env)
        tags.append(tag)

    o_pos = state.layout.position("O")
    dims = state.layout.dims
    stride = int(np.prod(dims[o_pos + 1:], dtype=int))
    idx = np.arange(state.dim)
    o_index = (idx // stride) % dims[o_pos]

    new_vec = np.zeros(new_dim, dtype=complex)
    for o in (0, 1):
        masked = np.where(o_index == o, state.vector, 0.0)
        new_vec += np.kron(masked, tags[o])

    new_layout = state.layout
    for j in range(n_env):
        new_layout = new_layout.extended(f"E{j + 1}", 2)
    enlarged = MSState(new_vec, new_layout)
    reduced = partial_trace(enlarged.density(), new_layout, state.layout.labels)
    return DecoherenceResult(enlarged, factor, reduced)


def _premeasure_generator() -> np.ndarray:
    """Generator whose tuned evolution equals the net-effect unitary exactly."""
    p1 = np.outer(BASIS_1, BASIS_1.conj())
    p2 = np.outer(BASIS_2, BASIS_2.conj())
    k1 = (math.pi / 2.0) * (_HADAMARD - IDENTITY_2)
    k2 = (math.pi / 4.0) * PAULI_Y
    return np.kron(p1, k1) + np.kron(p2, k2)


def hamiltonian_premeasure_crosscheck(spec: HamiltonianSpec, state: MSState,
                                      control: str = "S", apparatus: str = "D") -> CrosscheckResult:
    """Evolve under the concrete premeasurement generator and compare.

    At the tuned coupling*duration the generated unitary reproduces the
    net-effect premeasurement map; away from it the evolved state is returned
    with a mismatch diagnostic rather than an error.
    """
    u4 = unitary_exp(_premeasure_generator(), spec.coupling * spec.duration)
    evolved = _apply_two_factor_unitary(state, u4, control, apparatus)
    canonical = _apply_two_factor_unitary(state, PREMEASURE_UNITARY, control, apparatus)
    fidelity = float(abs(np.vdot(canonical.vector, evolved.vector)) ** 2)
    if fidelity > 1.0 - 1e-9:
        return CrosscheckResult(evolved, fidelity, True)
    return CrosscheckResult(
        evolved,
        fidelity,
        False,
        f"coupling*duration={spec.coupling * spec.duration!r} is not tuned; "
        f"fidelity to the net-effect map is {fidelity!r}",
    )


def pointer_branch_amplitudes(state: MSState, basis: PointerBasis | None = None,
                              tol: float = 1e-10) -> tuple[complex, complex]:
    """Coefficients of the state in the diagonal pointer product basis.

    The state must be (within `tol`) a combination of the two branch products
    |b_1 b_1 ... b_1> and |b_2 b_2 ... b_2>; anything else raises
    DecompositionError. One factor's basis may be overridden via `basis`.
    """
    layout = state.layout
    branch_vectors = []
    for i in (0, 1):
        parts = []
        for label, dim in layout.factors:
            if dim != 2:
                raise UsageError("pointer decomposition needs two-dimensional factors")
            if basis is not None and label == basis.subsystem:
                parts.append(basis.basis_states[i])
            else:
                parts.append(BASIS_1 if i == 0 else BASIS_2)
        branch = parts[0]
        for part in parts[1:]:
            branch = np.kron(branch, part)
        branch_vectors.append(branch)
    a1 = complex(np.vdot(branch_vectors[0], state.vector))
    a2 = complex(np.vdot(branch_vectors[1], state.vector))
    residual = state.vector - a1 * branch_vectors[0] - a2 * branch_vectors[1]
    if float(np.linalg.norm(residual)) > tol:
        raise DecompositionError(
            f"state is not a combination of the pointer branch products "
            f"(residual norm {float(np.linalg.norm(residual))!r})"
        )
    return a1, a2
