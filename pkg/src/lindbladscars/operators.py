"""Sparse operators and superoperators on spin-1/2 and spin-1 chains.

Conventions fixed project-wide:

* Local basis order: spin-1/2 is (up, down) with sigma^z = diag(1, -1);
  spin-1 is (+, 0, -) with S^z = diag(1, 0, -1).
* Site indexing is 1-based in every public signature; site 1 is the
  leftmost (most significant) tensor factor, so the computational basis
  index of a product state is ``sum_j digit_j * d**(L-j)``.
* Operator vectorization is row-major (C order), ``vec(A) = A.reshape(-1)``.
  Under this stacking the adjoint action obeys the exact identity
  ``[A, .] = kron(A, 1) - kron(1, A.T)`` and ``Tr[A^dag B] = vec(A)^dag vec(B)``.
* Sparse storage prunes entries below 1e-14 in magnitude so that repeated
  superoperator products stay tractable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

PRUNE_TOL = 1e-14
HERMITICITY_TOL = 1e-12

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class HilbertSpec:
    """Tensor-product space of ``L`` spins with local dimension 2 or 3."""

    L: int
    local_dim: int = 2
    boundary: str = "open"

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"need at least two sites, got L={self.L}")
        if self.local_dim not in (2, 3):
            raise ValueError(f"local_dim must be 2 or 3, got {self.local_dim}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def dim(self) -> int:
        return self.local_dim**self.L

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbour pairs (1-based); wraps around when periodic."""
        pairs = [(j, j + 1) for j in range(1, self.L)]
        if self.periodic:
            pairs.append((self.L, self.L + 1))  # embed() folds L+1 back to 1
        return pairs

    def local_mz(self) -> np.ndarray:
        """Magnetization quantum per local basis state."""
        return np.array([1, -1]) if self.local_dim == 2 else np.array([1, 0, -1])


def _pruned(mat) -> sp.csr_matrix:
    m = sp.csr_matrix(mat, dtype=complex)
    m.data[np.abs(m.data) < PRUNE_TOL] = 0.0
    m.eliminate_zeros()
    return m


class SparseOperator:
    """Complex sparse matrix on the full chain, tagged with its HilbertSpec.

    Treated as immutable after construction; do not mutate ``.matrix``.
    """

    def __init__(self, spec: HilbertSpec, matrix):
        mat = _pruned(matrix)
        if mat.shape != (spec.dim, spec.dim):
            raise ValueError(f"matrix shape {mat.shape} does not match dim {spec.dim}")
        self.spec = spec
        self.matrix = mat
        self._hermitian: bool | None = None

    @property
    def is_hermitian(self) -> bool:
        if self._hermitian is None:
            diff = self.matrix - self.matrix.conj().T
            err = np.max(np.abs(diff.data)) if diff.nnz else 0.0
            self._hermitian = bool(err < HERMITICITY_TOL)
        return self._hermitian

    def dag(self) -> "SparseOperator":
        return SparseOperator(self.spec, self.matrix.conj().T)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm(self) -> float:
        """Hilbert-Schmidt (Frobenius) norm."""
        return float(sp.linalg.norm(self.matrix))

    def trace(self) -> complex:
        return complex(self.matrix.trace())

    def expval(self, psi: np.ndarray) -> complex:
        return complex(np.vdot(psi, self.matrix @ psi))

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            return SparseOperator(self.spec, self.matrix @ other.matrix)
        return self.matrix @ other

    def __add__(self, other):
        return SparseOperator(self.spec, self.matrix + other.matrix)

    def __sub__(self, other):
        return SparseOperator(self.spec, self.matrix - other.matrix)

    def __mul__(self, scalar):
        return SparseOperator(self.spec, self.matrix * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SparseOperator(L={self.spec.L}, d={self.spec.local_dim}, nnz={self.matrix.nnz})"


class SparseSuperOperator:
    """Sparse matrix acting on row-major vectorized operators."""

    def __init__(self, spec: HilbertSpec, matrix):
        mat = _pruned(matrix)
        d2 = spec.dim**2
        if mat.shape != (d2, d2):
            raise ValueError(f"superoperator shape {mat.shape} does not match {d2}")
        self.spec = spec
        self.matrix = mat

    def apply(self, op) -> np.ndarray:
        """Apply to an operator (dense/sparse matrix), returning a dense matrix."""
        d = int(np.sqrt(self.matrix.shape[0]))
        mat = op.matrix if isinstance(op, SparseOperator) else op
        v = np.asarray(mat.toarray() if sp.issparse(mat) else mat, dtype=complex)
        return (self.matrix @ v.reshape(-1)).reshape(d, d)

    def __add__(self, other):
        return SparseSuperOperator(self.spec, self.matrix + other.matrix)

    def __sub__(self, other):
        return SparseSuperOperator(self.spec, self.matrix - other.matrix)

    def __mul__(self, scalar):
        return SparseSuperOperator(self.spec, self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return SparseSuperOperator(self.spec, self.matrix @ other.matrix)

    def norm(self) -> float:
        return float(sp.linalg.norm(self.matrix))

    def __repr__(self):
        return f"SparseSuperOperator(dim={self.matrix.shape[0]}, nnz={self.matrix.nnz})"


def vec(mat) -> np.ndarray:
    """Row-major vectorization."""
    a = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
    return a.astype(complex).reshape(-1)


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    return np.asarray(v, dtype=complex).reshape(d, d)


# ---------------------------------------------------------------------------
# local operators

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
    "P_up": np.array([[1, 0], [0, 0]], dtype=complex),
    "P_down": np.array([[0, 0], [0, 1]], dtype=complex),
}

_SPIN1 = {
    "z": np.diag([1.0, 0.0, -1.0]).astype(complex),
    "z2": np.diag([1.0, 0.0, 1.0]).astype(complex),
    "+": _SQRT2 * np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]], dtype=complex),
    "-": _SQRT2 * np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=complex),
    "P_plus": np.diag([1.0, 0.0, 0.0]).astype(complex),
    "P_zero": np.diag([0.0, 1.0, 0.0]).astype(complex),
    "P_minus": np.diag([0.0, 0.0, 1.0]).astype(complex),
}
_SPIN1["x"] = (_SPIN1["+"] + _SPIN1["-"]) / 2.0
_SPIN1["y"] = (_SPIN1["+"] - _SPIN1["-"]) / 2.0j


def local_operator(kind: str, local_dim: int) -> np.ndarray:
    """Single-site spin matrix; Pauli convention for spin-1/2, S=1 matrices for spin-1."""
    table = {2: _PAULI, 3: _SPIN1}.get(local_dim)
    if table is None:
        raise ValueError(f"local_dim must be 2 or 3, got {local_dim}")
    if kind not in table:
        raise ValueError(f"operator {kind!r} not defined for local_dim={local_dim}")
    return table[kind].copy()


def embed(local_ops: list[tuple[int, np.ndarray]], spec: HilbertSpec) -> SparseOperator:
    """Kronecker-embed single-site matrices at the given (1-based) sites.

    Sites in ``L+1 .. 2L`` wrap around under periodic boundary; wrapping under
    open boundary raises.
    """
    d = spec.local_dim
    factors = [None] * spec.L
    for site, mat in local_ops:
        j = site
        if j > spec.L:
            if not spec.periodic:
                raise ValueError(f"site {site} wraps around an open chain of length {spec.L}")
            j = (site - 1) % spec.L + 1
        if not 1 <= j <= spec.L:
            raise ValueError(f"site {site} out of range for L={spec.L}")
        if factors[j - 1] is not None:
            raise ValueError(f"duplicate site {j} in embedding")
        mat = np.asarray(mat, dtype=complex)
        if mat.shape != (d, d):
            raise ValueError(f"local matrix at site {site} has shape {mat.shape}, expected {(d, d)}")
        factors[j - 1] = sp.csr_matrix(mat)

    ident = sp.identity(d, dtype=complex, format="csr")
    out = sp.identity(1, dtype=complex, format="csr")
    for f in factors:
        out = sp.kron(out, ident if f is None else f, format="csr")
    return SparseOperator(spec, out)


def site_operator(spec: HilbertSpec, kind: str, site: int) -> SparseOperator:
    return embed([(site, local_operator(kind, spec.local_dim))], spec)


def total_sz(spec: HilbertSpec) -> SparseOperator:
    """Extensive z-magnetization sum_j S_j^z (sigma^z for spin-1/2)."""
    mz = spec.local_mz()
    diag = np.zeros(spec.dim)
    # digit decomposition, site 1 most significant
    idx = np.arange(spec.dim)
    for j in range(spec.L):
        digits = (idx // spec.local_dim ** (spec.L - 1 - j)) % spec.local_dim
        diag = diag + mz[digits]
    return SparseOperator(spec, sp.diags(diag.astype(complex)))


def adjoint_superop(a: SparseOperator) -> SparseSuperOperator:
    """Commutator superoperator [A, .] = kron(A, 1) - kron(1, A.T)."""
    d = a.spec.dim
    ident = sp.identity(d, dtype=complex, format="csr")
    m = sp.kron(a.matrix, ident, format="csr") - sp.kron(ident, a.matrix.T, format="csr")
    return SparseSuperOperator(a.spec, m)


# ---------------------------------------------------------------------------
# magnetization sectors

@dataclass(frozen=True)
class SectorPartition:
    """Computational-basis indices grouped by total S^z, sorted by M ascending."""

    spec: HilbertSpec
    sectors: tuple[tuple[int, tuple[int, ...]], ...] = field(repr=False)

    def magnetizations(self) -> list[int]:
        return [m for m, _ in self.sectors]

    def indices(self, m: int) -> np.ndarray:
        for mm, idx in self.sectors:
            if mm == m:
                return np.array(idx, dtype=int)
        raise KeyError(f"no sector with magnetization {m}")

    def dimension(self, m: int) -> int:
        return len(self.indices(m))


def sector_partition(spec: HilbertSpec) -> SectorPartition:
    """Group basis states by total magnetization (units of the local S^z quantum)."""
    mz = spec.local_mz()
    idx = np.arange(spec.dim)
    total = np.zeros(spec.dim, dtype=int)
    for j in range(spec.L):
        digits = (idx // spec.local_dim ** (spec.L - 1 - j)) % spec.local_dim
        total += mz[digits]
    sectors = []
    for m in sorted(set(total.tolist())):
        sectors.append((int(m), tuple(int(i) for i in idx[total == m])))
    return SectorPartition(spec, tuple(sectors))


def block_violation(a: SparseOperator, indices: np.ndarray) -> float:
    """Largest matrix element connecting the index set to its complement."""
    mask = np.zeros(a.spec.dim, dtype=bool)
    mask[indices] = True
    coo = a.matrix.tocoo()
    off = mask[coo.row] != mask[coo.col]
    return float(np.max(np.abs(coo.data[off]))) if np.any(off) else 0.0


def project_to_sector(a: SparseOperator, indices: np.ndarray, tol: float = 1e-12) -> sp.csr_matrix:
    """Restrict an operator to a sector subspace; the operator must be block diagonal."""
    indices = np.asarray(indices, dtype=int)
    leak = block_violation(a, indices)
    if leak > tol:
        raise ValueError(f"operator couples the sector to its complement (|element| = {leak:.3e})")
    return sp.csr_matrix(a.matrix[np.ix_(indices, indices)])
