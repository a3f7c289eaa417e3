"""Dense complex linear algebra kernel for small labeled tensor-product spaces.

Everything here works on plain numpy arrays: state vectors are 1-d complex
arrays with unit norm, operators are square complex matrices. Dimensions stay
tiny (a few hundred at most), so clarity beats cleverness throughout: dense
row-major storage, no sparsity, spectral methods everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, UsageError, ValidationError

# Hard cap on any composite Hilbert-space dimension built by this package.
DEFAULT_MAX_DIM = 4096

NORM_TOL = 1e-10
HERM_TOL = 1e-10
# Eigenvalue grouping: relative to the spectral radius, with an absolute floor.
GROUP_TOL_REL = 1e-9
GROUP_TOL_ABS = 1e-12


def as_complex_array(a) -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise ValidationError("entries must be finite (no NaN/Inf)")
    return arr


def validate_state_vector(v, tol: float = NORM_TOL) -> np.ndarray:
    """Check unit norm within `tol` and return the vector as a complex array."""
    vec = as_complex_array(v)
    if vec.ndim != 1 or vec.size == 0:
        raise ValidationError("state vector must be a nonempty 1-d array")
    norm_sq = float(np.vdot(vec, vec).real)
    if abs(norm_sq - 1.0) > tol:
        raise ValidationError(
            f"state vector squared norm {norm_sq!r} deviates from 1 by more than {tol}"
        )
    return vec


def validate_density_operator(rho, tol: float = HERM_TOL) -> np.ndarray:
    """Check hermiticity, unit trace and positivity within `tol`."""
    mat = as_complex_array(rho)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError("density operator must be a square matrix")
    if np.max(np.abs(mat - mat.conj().T)) > tol:
        raise ValidationError("density operator is not Hermitian within tolerance")
    tr = complex(np.trace(mat))
    if abs(tr - 1.0) > tol:
        raise ValidationError(f"density operator trace {tr!r} is not 1 within {tol}")
    if np.min(np.linalg.eigvalsh(hermitian_part(mat))) < -tol:
        raise ValidationError("density operator has a negative eigenvalue beyond tolerance")
    return mat


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def require_hermitian(m, tol: float = HERM_TOL) -> np.ndarray:
    mat = as_complex_array(m)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError("operator must be a square matrix")
    if np.max(np.abs(mat - mat.conj().T)) > tol:
        raise ValidationError("operator is not Hermitian within tolerance")
    return mat


def pure_density(v: np.ndarray) -> np.ndarray:
    """|v><v| for a 1-d state vector."""
    vec = np.asarray(v, dtype=complex)
    return np.outer(vec, vec.conj())


@dataclass(frozen=True)
class TensorLayout:
    """Ordered labeling of the tensor factors of a composite space.

    Each factor is a (label, dim) pair; labels are unique and the product of
    dims is the total dimension of any state the layout describes.
    """

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        labels = [lab for lab, _ in self.factors]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate factor labels in layout: {labels}")
        if any(d < 1 for _, d in self.factors):
            raise ValidationError("factor dimensions must be positive")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def position(self, label: str) -> int:
        for i, (lab, _) in enumerate(self.factors):
            if lab == label:
                return i
        raise UsageError(f"unknown factor label {label!r}; layout has {self.labels}")

    def dim_of(self, label: str) -> int:
        return self.factors[self.position(label)][1]

    def extended(self, label: str, dim: int) -> "TensorLayout":
        return TensorLayout(self.factors + ((label, dim),))

    def restricted_to(self, keep: tuple[str, ...]) -> "TensorLayout":
        keep_set = set(keep)
        return TensorLayout(tuple(f for f in self.factors if f[0] in keep_set))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Full spectrum of a Hermitian matrix with degenerate eigenvalues grouped.

    `eigenvalues` are sorted descending, `vectors` holds the matching
    orthonormal eigenvectors as columns, and `groups` partitions the index
    range into (representative value, index tuple) pairs.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    groups: tuple[tuple[float, tuple[int, ...]], ...]

    @property
    def distinct_values(self) -> tuple[float, ...]:
        return tuple(val for val, _ in self.groups)

    def group_indices(self, value: float, tol: float) -> tuple[int, ...]:
        best = None
        best_gap = tol
        for val, idx in self.groups:
            gap = abs(val - value)
            if gap <= best_gap:
                best, best_gap = idx, gap
        if best is None:
            raise LookupError(
                f"no eigenvalue group within {tol} of {value}; spectrum has {self.distinct_values}"
            )
        return best


def tensor_product(a, b, max_dim: int = DEFAULT_MAX_DIM) -> np.ndarray:
    """Kronecker product of two vectors or two matrices.

    Index convention for matrices: (A otimes B)[i*r + k, j*s + l] = A[i,j] * B[k,l]
    with B of shape (r, s). numpy's kron implements exactly this.
    """
    aa = as_complex_array(a)
    bb = as_complex_array(b)
    if aa.ndim != bb.ndim or aa.ndim not in (1, 2):
        raise UsageError("tensor_product expects two vectors or two matrices")
    out_size = aa.shape[0] * bb.shape[0]
    if out_size > max_dim:
        raise CapacityError(
            f"tensor product dimension {out_size} exceeds the maximum {max_dim}"
        )
    return np.kron(aa, bb)


def tensor_many(*ops, max_dim: int = DEFAULT_MAX_DIM) -> np.ndarray:
    out = as_complex_array(ops[0])
    for op in ops[1:]:
        out = tensor_product(out, op, max_dim=max_dim)
    return out


def partial_trace(rho, layout: TensorLayout, keep) -> np.ndarray:
    """Reduced density matrix on the kept factors, in layout order.

    `keep` is an iterable of factor labels; the remaining factors are traced
    out. Works for any density matrix matching the layout's total dimension.
    """
    keep = tuple(keep) if not isinstance(keep, str) else (keep,)
    if not keep:
        raise UsageError("keep set must be nonempty")
    positions = sorted(layout.position(lab) for lab in keep)
    mat = as_complex_array(rho)
    n = len(layout.factors)
    dims = layout.dims
    total = layout.total_dim
    if mat.shape != (total, total):
        raise UsageError(f"density shape {mat.shape} does not match layout dim {total}")

    tensor = mat.reshape(dims + dims)
    # einsum: contract row/col indices of traced factors pairwise.
    row_idx = list(range(n))
    col_idx = [n + i if i in positions else i for i in range(n)]
    out_idx = [i for i in positions] + [n + i for i in positions]
    reduced = np.einsum(tensor, row_idx + col_idx, out_idx)
    d_keep = int(np.prod([dims[i] for i in positions]))
    return reduced.reshape(d_keep, d_keep)


def reduced_state(vec: np.ndarray, layout: TensorLayout, keep) -> np.ndarray:
    """Partial trace of |vec><vec| keeping the given factor labels."""
    return partial_trace(pure_density(vec), layout, keep)


def _group_sorted_desc(values: np.ndarray) -> tuple[tuple[float, tuple[int, ...]], ...]:
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    tol = max(GROUP_TOL_REL * scale, GROUP_TOL_ABS)
    groups: list[tuple[float, tuple[int, ...]]] = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or abs(values[i] - values[i - 1]) > tol:
            members = tuple(range(start, i))
            rep = float(np.mean(values[start:i]))
            groups.append((rep, members))
            start = i
    return tuple(groups)


def eig_hermitian(h) -> SpectralDecomposition:
    """Spectral decomposition with eigenvalues sorted descending and grouped."""
    mat = require_hermitian(h)
    vals, vecs = np.linalg.eigh(hermitian_part(mat))
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    return SpectralDecomposition(vals, vecs, _group_sorted_desc(vals))


def projector_onto(spec: SpectralDecomposition, value: float, tol: float) -> np.ndarray:
    """Orthogonal projector onto the eigenvalue group within `tol` of `value`."""
    idx = spec.group_indices(value, tol)
    block = spec.vectors[:, list(idx)]
    return block @ block.conj().T


def expectation(state, obs) -> float:
    """<obs> for a state vector or density matrix; the result must be real."""
    op = require_hermitian(obs)
    arr = as_complex_array(state)
    if arr.ndim == 1:
        if arr.shape[0] != op.shape[0]:
            raise UsageError(f"state dim {arr.shape[0]} does not match operator dim {op.shape[0]}")
        val = complex(np.vdot(arr, op @ arr))
    elif arr.ndim == 2:
        if arr.shape != op.shape:
            raise UsageError(f"density shape {arr.shape} does not match operator {op.shape}")
        val = complex(np.trace(arr @ op))
    else:
        raise UsageError("state must be a vector or a density matrix")
    if abs(val.imag) >= 1e-9:
        raise ValidationError(f"expectation value has imaginary part {val.imag!r}")
    return float(val.real)


def unitary_exp(h, t: float) -> np.ndarray:
    """exp(-i*h*t) for a Hermitian generator h, via spectral decomposition."""
    spec = eig_hermitian(h)
    phases = np.exp(-1j * spec.eigenvalues * t)
    return (spec.vectors * phases) @ spec.vectors.conj().T


def embed_operator(op: np.ndarray, layout: TensorLayout, label: str) -> np.ndarray:
    """Lift a single-factor operator to the full space: identity elsewhere."""
    mat = as_complex_array(op)
    pos = layout.position(label)
    if mat.shape != (layout.dims[pos], layout.dims[pos]):
        raise UsageError(
            f"operator shape {mat.shape} does not match factor {label!r} of dim {layout.dims[pos]}"
        )
    pieces = [np.eye(d, dtype=complex) if i != pos else mat for i, d in enumerate(layout.dims)]
    return tensor_many(*pieces, max_dim=layout.total_dim)


class HermitianObservable:
    """A self-adjoint operator with a lazily cached spectral decomposition.

    `scope` optionally names the tensor factor the operator acts on, so it can
    be embedded into a composite space later.
    """

    def __init__(self, matrix, scope: str | None = None):
        self.matrix = require_hermitian(matrix)
        self.scope = scope
        self._spectral: SpectralDecomposition | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def spectral(self) -> SpectralDecomposition:
        if self._spectral is None:
            self._spectral = eig_hermitian(self.matrix)
        return self._spectral

    def embedded(self, layout: TensorLayout) -> np.ndarray:
        if self.scope is None:
            raise UsageError("observable has no scope label to embed by")
        return embed_operator(self.matrix, layout, self.scope)

    def __repr__(self):
        return f"HermitianObservable(dim={self.dim}, scope={self.scope!r})"


# Pauli matrices; all pointer/spin operators in the package are these over 2.
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
