"""Observable algebra and the eigenvalue-discrimination feasibility solver.

The central question: given a set of states and a required pattern of equal /
distinct eigenvalues, does any self-adjoint operator have all of them as
eigenvectors with that pattern? Two facts decide it. Eigenvectors of a
Hermitian operator with distinct eigenvalues are orthogonal, so any
non-orthogonal pair of states is forced onto a common eigenvalue. And the
operator acts linearly, so any linear dependence among the states forces the
matching dependence among the scaled states, which pins eigenvalues against
each other. Propagating all forced equalities either merges two groups that
were required distinct (infeasible, with the merge chain as certificate) or
leaves orthogonal classes that an explicit projector sum discriminates
(feasible, with the operator as witness).

A brute-force least-squares oracle over an explicit eigenvalue grid provides
an independent numerical check of every verdict.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations, permutations, product

import numpy as np

from .chain import BASIS_1, BASIS_2, MSState, PointerBasis, Scenario, full_chain
from .errors import UsageError, ValidationError
from .linalg import (
    HermitianObservable,
    embed_operator,
    validate_state_vector,
)

OVERLAP_TOL = 1e-10
WITNESS_TOL = 1e-9


@dataclass(frozen=True)
class PointerAlgebra:
    """Pointer observable and its two conjugates on one two-dim factor."""

    q: HermitianObservable
    qx: HermitianObservable
    qy: HermitianObservable
    scope: str


@dataclass(frozen=True)
class ObservableSpec:
    """Real coefficient triple combining the pointer algebra, unit normalized."""

    d0: float
    d1: float
    d2: float

    def __post_init__(self):
        norm_sq = self.d0**2 + self.d1**2 + self.d2**2
        if abs(norm_sq - 1.0) > 1e-12:
            raise ValidationError(
                f"coefficients not normalized: d0^2+d1^2+d2^2 = {norm_sq!r}"
            )


@dataclass(frozen=True)
class DiscriminationProblem:
    """States plus the pattern of equal/distinct eigenvalues they must take.

    States inside one group must receive equal eigenvalues; states in
    different groups must receive different ones. Ungrouped states only need
    to be eigenvectors, with no constraint on their eigenvalue.
    """

    space_dim: int
    states: tuple[np.ndarray, ...]
    distinct_groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.states:
            raise ValidationError("a discrimination problem needs at least one state")
        states = tuple(validate_state_vector(s) for s in self.states)
        object.__setattr__(self, "states", states)
        for s in states:
            if s.shape[0] != self.space_dim:
                raise ValidationError(
                    f"state dim {s.shape[0]} does not match space_dim {self.space_dim}"
                )
        groups = tuple(tuple(sorted(g)) for g in self.distinct_groups)
        object.__setattr__(self, "distinct_groups", groups)
        seen: set[int] = set()
        for g in groups:
            if not g:
                raise ValidationError("empty group in distinct_groups")
            for i in g:
                if not 0 <= i < len(states):
                    raise ValidationError(f"group index {i} out of range")
                if i in seen:
                    raise ValidationError(f"state index {i} appears in two groups")
                seen.add(i)


@dataclass(frozen=True)
class MergeEvidence:
    """Why two states are forced onto a common eigenvalue.

    kind "overlap": their inner product is nonzero (value in detail).
    kind "dependence": a linear dependence among the states pins them
    (detail holds the null-space basis vectors as coefficient tuples).
    kind "same-group": the problem itself requires them equal.
    """

    kind: str
    i: int
    j: int
    detail: tuple = ()


@dataclass(frozen=True)
class ForcedEquality:
    group_a: int
    group_b: int
    chain: tuple[MergeEvidence, ...]


@dataclass(frozen=True)
class FeasibilityResult:
    verdict: str  # "FEASIBLE" | "INFEASIBLE"
    witness: tuple[HermitianObservable, tuple[float, ...]] | None = None
    certificate: tuple[ForcedEquality, ...] | None = None

    @property
    def feasible(self) -> bool:
        return self.verdict == "FEASIBLE"


def build_pointer_algebra(scope: str, basis: PointerBasis | None = None) -> PointerAlgebra:
    """Half-Pauli pointer triple in the pointer basis of a two-dim factor."""
    if basis is None:
        b1, b2 = BASIS_1, BASIS_2
    else:
        b1, b2 = basis.basis_states
    if b1.shape != (2,) or b2.shape != (2,):
        raise UsageError("pointer algebra is defined on two-dimensional factors only")
    p11 = np.outer(b1, b1.conj())
    p22 = np.outer(b2, b2.conj())
    p12 = np.outer(b1, b2.conj())
    p21 = np.outer(b2, b1.conj())
    q = (p11 - p22) / 2.0
    qx = (p12 + p21) / 2.0
    qy = (-1j * p12 + 1j * p21) / 2.0
    return PointerAlgebra(
        HermitianObservable(q, scope),
        HermitianObservable(qx, scope),
        HermitianObservable(qy, scope),
        scope,
    )


def combine_observable(alg: PointerAlgebra, spec: ObservableSpec) -> HermitianObservable:
    """Unit combination d0*q + d1*qx + d2*qy; eigenvalues are +-1/2."""
    matrix = spec.d0 * alg.q.matrix + spec.d1 * alg.qx.matrix + spec.d2 * alg.qy.matrix
    return HermitianObservable(matrix, alg.scope)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.parent[rj] = ri
        return True


def _null_space(columns: np.ndarray, rel_tol: float) -> np.ndarray:
    """Orthonormal basis (as columns) of the null space of a column-stacked matrix."""
    _, s, vh = np.linalg.svd(columns, full_matrices=True)
    cutoff = max(rel_tol * (s[0] if s.size else 0.0), 1e-12)
    rank = int(np.sum(s > cutoff))
    return vh[rank:].conj().T


def _dependence_forced_pairs(states, rel_tol: float = OVERLAP_TOL):
    """Pairs of state indices whose eigenvalues every dependence constraint pins equal.

    A dependence sum_k c_k phi_k = 0 requires the componentwise product c*g to
    stay inside the null space. The admissible eigenvalue vectors g therefore
    form a real subspace; two indices are forced equal when every vector in it
    has equal components there.
    """
    m = len(states)
    phi = np.column_stack(states)
    null_basis = _null_space(phi, rel_tol)
    r = null_basis.shape[1]
    if r == 0:
        return [], null_basis
    projector = null_basis @ null_basis.conj().T
    complement = np.eye(m) - projector
    blocks = []
    for c in null_basis.T:
        constraint = complement @ np.diag(c)
        blocks.append(constraint.real)
        blocks.append(constraint.imag)
    stacked = np.vstack(blocks)
    admissible = _null_space(stacked, 1e-12).real
    forced = []
    for j, k in combinations(range(m), 2):
        diff = np.zeros(m)
        diff[j], diff[k] = 1.0, -1.0
        if np.linalg.norm(admissible.T @ diff) < 1e-8:
            forced.append((j, k))
    return forced, null_basis


def check_eigen_discrimination(problem: DiscriminationProblem,
                               overlap_tol: float = OVERLAP_TOL) -> FeasibilityResult:
    """Decide whether any Hermitian operator realizes the eigenvalue pattern.

    Feasible verdicts come with an explicit witness operator built from
    projectors onto the merged-class spans, with consecutive integer
    eigenvalues; infeasible verdicts come with the forced-equality chains that
    collapse two required-distinct groups.
    """
    states = problem.states
    m = len(states)
    uf = _UnionFind(m)
    adjacency: dict[int, list[tuple[int, MergeEvidence]]] = {i: [] for i in range(m)}

    def record(ev: MergeEvidence):
        uf.union(ev.i, ev.j)
        adjacency[ev.i].append((ev.j, ev))
        adjacency[ev.j].append((ev.i, ev))

    for group in problem.distinct_groups:
        for a, b in zip(group, group[1:]):
            record(MergeEvidence("same-group", a, b))

    for j, k in combinations(range(m), 2):
        ov = complex(np.vdot(states[j], states[k]))
        if abs(ov) > overlap_tol:
            record(MergeEvidence("overlap", j, k, (ov,)))

    dep_pairs, null_basis = _dependence_forced_pairs(states, overlap_tol)
    dep_detail = tuple(tuple(complex(x) for x in c) for c in null_basis.T)
    for j, k in dep_pairs:
        record(MergeEvidence("dependence", j, k, dep_detail))

    conflicts = []
    groups = problem.distinct_groups
    for (ga, gb) in combinations(range(len(groups)), 2):
        ra = uf.find(groups[ga][0])
        rb = uf.find(groups[gb][0])
        if ra == rb:
            chain = _merge_path(adjacency, groups[ga][0], groups[gb][0])
            conflicts.append(ForcedEquality(ga, gb, chain))
    if conflicts:
        return FeasibilityResult("INFEASIBLE", certificate=tuple(conflicts))

    roots = sorted({uf.find(i) for i in range(m)}, key=lambda r: min(i for i in range(m) if uf.find(i) == r))
    assignment = np.zeros(m)
    witness = np.zeros((problem.space_dim, problem.space_dim), dtype=complex)
    for value, root in enumerate(roots):
        members = [i for i in range(m) if uf.find(i) == root]
        span = np.column_stack([states[i] for i in members])
        u, s, _ = np.linalg.svd(span, full_matrices=False)
        basis = u[:, s > overlap_tol * s[0]]
        witness += float(value) * (basis @ basis.conj().T)
        for i in members:
            assignment[i] = float(value)

    for i, phi in enumerate(states):
        residual = np.linalg.norm(witness @ phi - assignment[i] * phi)
        if residual > WITNESS_TOL:
            raise RuntimeError(
                f"witness construction failed for state {i}: residual {residual!r}"
            )
    obs = HermitianObservable(witness)
    return FeasibilityResult("FEASIBLE", witness=(obs, tuple(float(v) for v in assignment)))


def _merge_path(adjacency, start: int, goal: int) -> tuple[MergeEvidence, ...]:
    """Shortest evidence chain connecting two states in the merge graph."""
    prev: dict[int, tuple[int, MergeEvidence]] = {}
    queue = deque([start])
    seen = {start}
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for other, ev in adjacency[node]:
            if other not in seen:
                seen.add(other)
                prev[other] = (node, ev)
                queue.append(other)
    chain = []
    node = goal
    while node != start:
        node, ev = prev[node]
        chain.append(ev)
    return tuple(reversed(chain))


def verify_certificate(problem: DiscriminationProblem, result: FeasibilityResult,
                       overlap_tol: float = OVERLAP_TOL) -> bool:
    """Re-check every forced equality in an infeasibility certificate."""
    if result.certificate is None:
        return False
    states = problem.states
    for forced in result.certificate:
        if not forced.chain:
            return False
        for ev in forced.chain:
            if ev.kind == "overlap":
                if abs(np.vdot(states[ev.i], states[ev.j])) <= overlap_tol:
                    return False
            elif ev.kind == "dependence":
                for coeffs in ev.detail:
                    combo = sum(c * states[k] for k, c in enumerate(coeffs))
                    if np.linalg.norm(combo) > 1e-8:
                        return False
                dep_pairs, _ = _dependence_forced_pairs(states, overlap_tol)
                if (ev.i, ev.j) not in dep_pairs and (ev.j, ev.i) not in dep_pairs:
                    return False
            elif ev.kind == "same-group":
                if not any(ev.i in g and ev.j in g for g in problem.distinct_groups):
                    return False
            else:
                return False
    return True


def _hermitian_design_matrix(states, dim: int) -> np.ndarray:
    """Real design matrix mapping Hermitian parameters to stacked G@phi values.

    Parameter order: the dim diagonal entries, then (real, imag) pairs for
    each upper-triangle entry. Rows stack Re and Im of G@phi per state.
    """
    m = len(states)
    n_params = dim * dim
    a = np.zeros((2 * dim * m, n_params))
    col = 0
    for i in range(dim):
        for k, phi in enumerate(states):
            v = np.zeros(dim, dtype=complex)
            v[i] = phi[i]
            a[2 * dim * k: 2 * dim * k + dim, col] = v.real
            a[2 * dim * k + dim: 2 * dim * (k + 1), col] = v.imag
        col += 1
    for i in range(dim):
        for j in range(i + 1, dim):
            for part in (1.0, 1.0j):
                for k, phi in enumerate(states):
                    v = np.zeros(dim, dtype=complex)
                    v[i] = part * phi[j]
                    v[j] = np.conj(part) * phi[i]
                    a[2 * dim * k: 2 * dim * k + dim, col] = v.real
                    a[2 * dim * k + dim: 2 * dim * (k + 1), col] = v.imag
                col += 1
    return a


def numeric_feasibility_oracle(problem: DiscriminationProblem, eigenvalue_grid,
                               tol: float = 1e-10):
    """Brute-force least squares over every admissible grid assignment.

    For each way of assigning grid values (distinct across groups, free for
    ungrouped states), minimize sum_k ||G phi_k - g_k phi_k||^2 over Hermitian
    G and return the smallest residual with its assignment.
    """
    grid = sorted(set(float(v) for v in eigenvalue_grid))
    if len(grid) < 2:
        raise ValidationError("eigenvalue grid needs at least 2 distinct values")
    groups = problem.distinct_groups
    if len(grid) < len(groups):
        raise ValidationError(
            f"grid of {len(grid)} values cannot give {len(groups)} groups distinct eigenvalues"
        )
    states = problem.states
    m = len(states)
    dim = problem.space_dim
    grouped = {i for g in groups for i in g}
    free = [i for i in range(m) if i not in grouped]

    a = _hermitian_design_matrix(states, dim)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    rank = int(np.sum(s > tol * (s[0] if s.size else 0.0)))
    q = u[:, :rank]

    best = np.inf
    best_assignment = None
    for group_vals in permutations(grid, len(groups)):
        for free_vals in product(grid, repeat=len(free)):
            g = np.zeros(m)
            for gi, idxs in enumerate(groups):
                for i in idxs:
                    g[i] = group_vals[gi]
            for fi, i in enumerate(free):
                g[i] = free_vals[fi]
            b = np.zeros(2 * dim * m)
            for k, phi in enumerate(states):
                target = g[k] * phi
                b[2 * dim * k: 2 * dim * k + dim] = target.real
                b[2 * dim * k + dim: 2 * dim * (k + 1)] = target.imag
            r = b - q @ (q.T @ b)
            residual = float(r @ r)
            if residual < best:
                best = residual
                best_assignment = tuple(float(v) for v in g)
    return best, best_assignment


@dataclass(frozen=True)
class ITObservable:
    """Joint interference-term observable coupling the pointer branches."""

    observable: HermitianObservable
    kind: str  # "full" | "sd"


def build_it_observable(kind: str = "full") -> ITObservable:
    """Symmetric interference-term observable on the full chain or the S,D pair.

    The operator swaps the two pointer branch products; its spectrum is
    {+1, -1} on the branch pair plus zero on everything else.
    """
    if kind == "full":
        dim, flip = 8, 7
    elif kind == "sd":
        dim, flip = 4, 3
    else:
        raise UsageError(f"kind must be 'full' or 'sd', got {kind!r}")
    matrix = np.zeros((dim, dim), dtype=complex)
    matrix[0, flip] = 1.0
    matrix[flip, 0] = 1.0
    return ITObservable(HermitianObservable(matrix), kind)


def restriction_eigenstate_lift_check(full_state: MSState,
                                      o_obs: HermitianObservable,
                                      tol: float = 1e-9) -> bool:
    """Check one instance of the eigenstate lift implication.

    If the observer restriction of the state is (a pure state and) an
    eigenstate of the observer observable, the full state must be an
    eigenstate of the embedded observable. Returns True when the implication
    holds, including vacuously when the restriction is not an eigenstate.
    """
    rho_o = full_state.reduced(("O",))
    purity = float(np.real(np.trace(rho_o @ rho_o)))
    if purity <= 1.0 - tol:
        return True
    _, vecs = np.linalg.eigh(rho_o)
    chi = vecs[:, -1]
    lam = float(np.real(np.vdot(chi, o_obs.matrix @ chi)))
    if np.linalg.norm(o_obs.matrix @ chi - lam * chi) > tol:
        return True
    embedded = embed_operator(o_obs.matrix, full_state.layout, "O")
    residual = np.linalg.norm(embedded @ full_state.vector - lam * full_state.vector)
    return bool(residual <= tol)


def superposition_discrimination_problem(a1: complex, a2: complex) -> DiscriminationProblem:
    """The chain's no-go instance: superposition vs both branch products.

    All three final chain states are required to take pairwise distinct
    eigenvalues of one joint observable.
    """
    psi_ms = full_chain(Scenario(a1, a2, "pure"))
    psi_1 = full_chain(Scenario(1.0, 0.0, "pure"))
    psi_2 = full_chain(Scenario(0.0, 1.0, "pure"))
    return DiscriminationProblem(
        8,
        (psi_ms.vector, psi_1.vector, psi_2.vector),
        ((0,), (1,), (2,)),
    )


def recognition_problem() -> DiscriminationProblem:
    """The trivially feasible instance: the two orthogonal pointer states."""
    return DiscriminationProblem(2, (BASIS_1, BASIS_2), ((0,), (1,)))
