"""Commutant algebras of Lindbladian spin chains.

The bond algebra of a chain is generated by the local Hamiltonian terms and
the (hermitian) jump operators.  Its commutant -- every operator commuting
with each generator -- is realized numerically as the kernel of the positive
semidefinite super-Hamiltonian ``P = sum_g [g,[g,.]]``, one double commutator
per generator.  The kernel basis then drives the block decomposition of the
Hilbert space into Krylov subspaces, the construction of strong symmetries,
stationary states from conserved overlaps, and Mazur bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .operators import (
    HilbertSpec,
    SparseOperator,
    SparseSuperOperator,
    adjoint_superop,
    sector_partition,
    total_sz,
    vec,
)

DEFAULT_KERNEL_TOL = 1e-10
# dense eigensolve up to this operator-space dimension, iterative beyond
DENSE_EIG_MAX = 2048
# shift-invert Lanczos up to this dimension, LOBPCG beyond
SHIFT_INVERT_MAX = 200_000

ROLE_HAMILTONIAN = "hamiltonian-term"
ROLE_JUMP = "jump-operator"
ROLE_BOTH = "both"
_ROLES = (ROLE_HAMILTONIAN, ROLE_JUMP, ROLE_BOTH)


@dataclass(frozen=True)
class BondAlgebra:
    """Generator list of a family of Lindbladians; the identity is implicit."""

    spec: HilbertSpec
    generators: tuple[tuple[str, SparseOperator, str], ...]

    def __post_init__(self):
        labels = set()
        for label, op, role in self.generators:
            if role not in _ROLES:
                raise ValueError(f"unknown generator role {role!r}")
            if label in labels:
                raise ValueError(f"duplicate generator label {label!r}")
            labels.add(label)
            if op.spec != self.spec:
                raise ValueError(f"generator {label!r} lives on a different space")
            if not op.is_hermitian:
                raise ValueError(f"generator {label!r} is not hermitian")

    def labels(self, role: str | None = None) -> list[str]:
        if role is None:
            return [lab for lab, _, _ in self.generators]
        want = {role, ROLE_BOTH}
        return [lab for lab, _, r in self.generators if r in want]

    def operator(self, label: str) -> SparseOperator:
        for lab, op, _ in self.generators:
            if lab == label:
                return op
        raise KeyError(label)

    def hamiltonian_terms(self) -> list[tuple[str, SparseOperator]]:
        return [(lab, op) for lab, op, r in self.generators if r in (ROLE_HAMILTONIAN, ROLE_BOTH)]

    def jump_operators(self) -> list[tuple[str, SparseOperator]]:
        return [(lab, op) for lab, op, r in self.generators if r in (ROLE_JUMP, ROLE_BOTH)]

    def conserves_magnetization(self, tol: float = 1e-12) -> bool:
        mz = total_sz(self.spec).matrix
        for _, op, _ in self.generators:
            if sp.linalg.norm(op.matrix @ mz - mz @ op.matrix) > tol:
                return False
        return True


def super_hamiltonian(algebra: BondAlgebra) -> SparseSuperOperator:
    """Frustration-free PSD superoperator whose kernel is the commutant.

    One ``[g,[g,.]]`` summand per Hamiltonian-role generator plus one per
    jump-role generator; a generator tagged 'both' therefore contributes twice.
    """
    total = None
    for _, op, role in algebra.generators:
        c = adjoint_superop(op).matrix
        term = c.conj().T @ c
        if role == ROLE_BOTH:
            term = term * 2.0
        total = term if total is None else total + term
    return SparseSuperOperator(algebra.spec, total)


@dataclass(frozen=True)
class CommutantBasis:
    """Orthonormal (Hilbert-Schmidt) basis of the commutant.

    ``gap`` is the smallest super-Hamiltonian eigenvalue above the kernel, so
    borderline dimension counts are visible to the caller.
    """

    spec: HilbertSpec
    operators: tuple[SparseOperator, ...]
    kernel_tol: float
    gap: float

    @property
    def dim(self) -> int:
        return len(self.operators)

    def vectors(self) -> np.ndarray:
        """Basis stacked as rows of row-major vectorizations."""
        return np.array([vec(q.matrix) for q in self.operators])

    def hermitian_basis(self) -> list[np.ndarray]:
        """Orthonormal hermitian basis spanning the same space (dense matrices)."""
        d = self.spec.dim
        rows = []
        for q in self.operators:
            m = q.matrix.toarray()
            rows.append(vec((m + m.conj().T) / 2.0))
            rows.append(vec((m - m.conj().T) / 2.0j))
        rows = np.array(rows)
        # SVD keeps an orthonormal real-span of rank dim(C)
        u, s, vh = np.linalg.svd(rows, full_matrices=False)
        keep = s > 1e-8 * s[0]
        basis = vh[keep]
        if basis.shape[0] != self.dim:
            raise SolverError(
                f"hermitian span rank {basis.shape[0]} != commutant dimension {self.dim}"
            )
        return [basis[i].reshape(d, d) for i in range(basis.shape[0])]


# ---------------------------------------------------------------------------
# kernel solvers

def _dense_kernel(p: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    w, v = la.eigh(p)
    cut = max(tol, 100 * np.finfo(float).eps * max(w[-1], 1.0))
    inside = w < cut
    if np.all(inside):
        raise SolverError("super-Hamiltonian numerically zero; kernel is everything")
    gap = float(w[~inside][0])
    return v[:, inside], gap

def _shift_invert_kernel(p: sp.csr_matrix, tol: float, seed: int) -> tuple[np.ndarray, float]:
    n = p.shape[0]
    scale = spla.onenormest(p)
    cut = max(tol, 100 * np.finfo(float).eps * max(scale, 1.0))
    k = 16
    # a generic start vector; symmetric choices can be exactly orthogonal to
    # kernel elements (e.g. traceless parity strings) and hide them forever
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v0 /= np.linalg.norm(v0)
    while True:
        k = min(k, n - 2)
        try:
            w, v = spla.eigsh(p, k=k, sigma=-1e-3, which="LM", v0=v0, tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"shift-invert Lanczos did not converge: {exc}") from exc
        order = np.argsort(w)
        w, v = w[order], v[:, order]
        if w[-1] >= cut or k == n - 2:
            inside = w < cut
            gap = float(w[~inside][0]) if np.any(~inside) else float("nan")
            return v[:, inside], gap
        k *= 2  # kernel might extend past the window


def _lobpcg_kernel(p: sp.csr_matrix, tol: float, seed: int) -> tuple[np.ndarray, float]:
    n = p.shape[0]
    rng = np.random.default_rng(seed)
    scale = spla.onenormest(p)
    cut = max(tol, 100 * np.finfo(float).eps * max(scale, 1.0))
    k = 16
    while True:
        k = min(k, max(n // 4, 2))
        x = np.linalg.qr(rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))[0]
        w, v = spla.lobpcg(p, x, largest=False, tol=1e-11, maxiter=1000)
        resid = np.linalg.norm(p @ v - v * w, axis=0)
        if np.max(resid) > 1e-8 * max(scale, 1.0):
            raise SolverError(f"LOBPCG residual {np.max(resid):.3e} above target")
        order = np.argsort(w)
        w, v = w[order], v[:, order]
        if w[-1] >= cut or k >= n // 4:
            inside = w < cut
            gap = float(w[~inside][0]) if np.any(~inside) else float("nan")
            return v[:, inside], gap
        k *= 2


def _kernel_of(p: sp.csr_matrix, tol: float, seed: int, method: str | None) -> tuple[np.ndarray, float]:
    n = p.shape[0]
    if method not in (None, "dense", "shift-invert", "lobpcg"):
        raise ValueError(f"unknown kernel method {method!r}")
    if method == "dense" or (method is None and n <= DENSE_EIG_MAX):
        return _dense_kernel(p.toarray(), tol)
    if method == "lobpcg" or (method is None and n > SHIFT_INVERT_MAX):
        return _lobpcg_kernel(p, tol, seed)
    return _shift_invert_kernel(p, tol, seed)


def _canonical_rows(rows: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Deterministic orthonormal basis of the row span.

    Reduced row echelon ordering (sorted by leading nonzero coordinate), then
    Gram-Schmidt in pivot order with the pivot entry phased real positive.
    """
    k = rows.copy().astype(complex)
    nrow, ncol = k.shape
    scale = np.max(np.abs(k))
    pivots = []
    r = 0
    for c in range(ncol):
        if r == nrow:
            break
        lead = r + int(np.argmax(np.abs(k[r:, c])))
        if np.abs(k[lead, c]) < tol * scale:
            continue
        k[[r, lead]] = k[[lead, r]]
        k[r] = k[r] / k[r, c]
        others = np.arange(nrow) != r
        k[others] -= np.outer(k[others, c], k[r])
        pivots.append(c)
        r += 1
    k = k[:r]
    for i in range(r):
        for j in range(i):
            k[i] -= (k[j].conj() @ k[i]) * k[j]
        k[i] /= np.linalg.norm(k[i])
        ph = k[i, pivots[i]]
        k[i] *= ph.conjugate() / abs(ph)
    return k


def _offset_subspaces(spec: HilbertSpec) -> list[np.ndarray]:
    """Vectorization index sets of fixed magnetization offset, |M_row> <M_col|."""
    part = sector_partition(spec)
    d = spec.dim
    by_offset: dict[int, list[np.ndarray]] = {}
    for m_row, idx_row in part.sectors:
        rows = np.asarray(idx_row, dtype=np.int64) * d
        for m_col, idx_col in part.sectors:
            cols = np.asarray(idx_col, dtype=np.int64)
            block = (rows[:, None] + cols[None, :]).ravel()
            by_offset.setdefault(m_row - m_col, []).append(block)
    return [np.sort(np.concatenate(v)) for _, v in sorted(by_offset.items())]


def commutant_basis(
    algebra: BondAlgebra,
    tol: float = DEFAULT_KERNEL_TOL,
    seed: int = 0,
    method: str | None = None,
) -> CommutantBasis:
    """Orthonormal basis of the commutant as the super-Hamiltonian null space.

    When every generator conserves total magnetization the kernel search runs
    independently on each fixed-offset block of operator space, which keeps
    the eigenproblem small for the magnetization-conserving chains.
    """
    if tol <= 0:
        raise ValueError("kernel tolerance must be positive")
    spec = algebra.spec
    d = spec.dim

    commutator_mats = [adjoint_superop(op).matrix.tocsr() for _, op, _ in algebra.generators]

    if algebra.conserves_magnetization():
        subspaces = _offset_subspaces(spec)
    else:
        subspaces = [np.arange(d * d, dtype=np.int64)]

    kernel_rows = []
    gap = np.inf
    for idx in subspaces:
        p_sub = None
        for c in commutator_mats:
            c_sub = c[idx][:, idx]
            term = c_sub.conj().T @ c_sub
            p_sub = term if p_sub is None else p_sub + term
        vecs, sub_gap = _kernel_of(sp.csr_matrix(p_sub), tol, seed, method)
        if np.isfinite(sub_gap):
            gap = min(gap, sub_gap)
        for col in vecs.T:
            full = np.zeros(d * d, dtype=complex)
            full[idx] = col
            kernel_rows.append(full)

    rows = _canonical_rows(np.array(kernel_rows))
    ops = tuple(SparseOperator(spec, row.reshape(d, d)) for row in rows)
    return CommutantBasis(spec=spec, operators=ops, kernel_tol=tol, gap=float(gap))


def max_commutator_residual(algebra: BondAlgebra, basis: CommutantBasis) -> float:
    """max over (Q, g) of ||[Q, g]|| / ||g||, the commutant membership residual."""
    worst = 0.0
    for _, g, _ in algebra.generators:
        gn = g.norm()
        for q in basis.operators:
            comm = q.matrix @ g.matrix - g.matrix @ q.matrix
            worst = max(worst, sp.linalg.norm(comm) / gn)
    return worst


# ---------------------------------------------------------------------------
# irrep decomposition

@dataclass(frozen=True)
class IrrepBlock:
    """One lambda block: d equivalent Krylov subspaces of dimension D."""

    label: int
    dim_krylov: int  # D_lambda
    multiplicity: int  # d_lambda
    projectors: tuple[SparseOperator, ...]  # Pi^lambda_{m,m}, m = 0..d-1
    intertwiners: dict[tuple[int, int], SparseOperator]  # all (m, m') pairs


@dataclass(frozen=True)
class IrrepDecomposition:
    spec: HilbertSpec
    blocks: tuple[IrrepBlock, ...]
    basis: CommutantBasis = field(repr=False)

    def krylov_count(self) -> int:
        return sum(b.multiplicity for b in self.blocks)

    def check_completeness(self) -> bool:
        return sum(b.dim_krylov * b.multiplicity for b in self.blocks) == self.spec.dim


def _leading_index(columns: np.ndarray) -> int:
    weight = np.linalg.norm(columns, axis=1)
    hits = np.nonzero(weight > 1e-8)[0]
    return int(hits[0]) if hits.size else 0


def _is_abelian(herm: list[np.ndarray], tol: float = 1e-10) -> bool:
    for i in range(len(herm)):
        for j in range(i + 1, len(herm)):
            if np.linalg.norm(herm[i] @ herm[j] - herm[j] @ herm[i]) > tol:
                return False
    return True


def irrep_decomposition(
    algebra: BondAlgebra,
    basis: CommutantBasis,
    seed: int = 0,
    retries: int = 5,
) -> IrrepDecomposition:
    """Simultaneous block diagonalization of the chain by its commutant.

    A random hermitian commutant element splits the Hilbert space into
    invariant eigenspaces; eigenspaces connected by any commutant basis
    element are merged into one lambda block, and normalized intertwiners
    between the copies are extracted.  A degeneracy collision of the random
    element is detected by the completeness checks and triggers a retry.

    For an abelian commutant the same minimal projectors are read off from
    the multiplication action of the random element inside the commutant,
    which avoids a full Hilbert-space eigendecomposition.
    """
    spec = algebra.spec
    d = spec.dim
    herm = basis.hermitian_basis()
    rng = np.random.default_rng(seed)
    abelian = _is_abelian(herm)
    last_err = None

    for _ in range(retries):
        coeffs = rng.standard_normal(len(herm))
        try:
            if abelian:
                blocks = _abelian_blocks(spec, herm, coeffs, len(basis.operators))
            else:
                r = sum(c * b for c, b in zip(coeffs, herm))
                w, v = la.eigh(r)
                spread = max(w[-1] - w[0], 1.0)
                splits = np.nonzero(np.diff(w) > 1e-7 * spread)[0]
                bounds = [0] + [int(s) + 1 for s in splits] + [d]
                spaces = [v[:, a:b] for a, b in zip(bounds[:-1], bounds[1:])]
                blocks = _assemble_blocks(spec, herm, spaces, len(basis.operators))
        except SolverError as exc:
            last_err = exc
            continue
        return IrrepDecomposition(spec=spec, blocks=tuple(blocks), basis=basis)

    raise SolverError(f"irrep decomposition failed after {retries} random elements: {last_err}")


def _abelian_blocks(spec, herm, coeffs, dim_c):
    """Minimal idempotents of an abelian commutant from its multiplication matrix."""
    d = spec.dim
    c = len(herm)
    flat = np.array([h.reshape(-1) for h in herm])
    r = sum(cc * b for cc, b in zip(coeffs, herm))
    mult = np.empty((c, c), dtype=complex)
    for j in range(c):
        rb = (r @ herm[j]).reshape(-1)
        mult[:, j] = flat.conj() @ rb
    if np.linalg.norm(mult - mult.conj().T) > 1e-8:
        raise SolverError("multiplication matrix not hermitian; commutant basis inaccurate")
    w, v = la.eigh(mult)
    if c > 1 and np.min(np.diff(w)) < 1e-7 * max(w[-1] - w[0], 1.0):
        raise SolverError("degenerate random element (collision)")

    projectors = []
    for mu in range(c):
        q = sum(v[i, mu] * herm[i] for i in range(c))
        q = (q + q.conj().T) / 2.0
        tr_q = np.trace(q).real
        tr_q2 = np.trace(q @ q).real
        if abs(tr_q) < 1e-10:
            raise SolverError("traceless idempotent candidate (collision)")
        alpha = tr_q2 / tr_q
        pi = q / alpha
        if np.linalg.norm(pi @ pi - pi) > 1e-8 * max(np.linalg.norm(pi), 1.0):
            raise SolverError("candidate is not idempotent (collision)")
        dim_k = int(round(np.trace(pi).real))
        if abs(np.trace(pi).real - dim_k) > 1e-6 or dim_k < 1:
            raise SolverError("projector trace is not an integer (collision)")
        projectors.append((pi, dim_k))

    def lead(pi):
        weight = np.linalg.norm(pi, axis=1)
        hits = np.nonzero(weight > 1e-8)[0]
        return int(hits[0]) if hits.size else 0

    projectors.sort(key=lambda t: lead(t[0]))
    blocks = []
    total = 0
    for label, (pi, dim_k) in enumerate(projectors):
        op = SparseOperator(spec, pi)
        blocks.append(
            IrrepBlock(
                label=label,
                dim_krylov=dim_k,
                multiplicity=1,
                projectors=(op,),
                intertwiners={(0, 0): op},
            )
        )
        total += dim_k
    if total != d:
        raise SolverError(f"projector traces sum to {total} != {d} (collision)")
    if len(blocks) != dim_c:
        raise SolverError("abelian block count does not match the commutant dimension")
    return blocks


def _assemble_blocks(spec, herm, spaces, dim_c):
    d = spec.dim
    n = len(spaces)
    # connectivity score sums to exactly 1 over an orthonormal commutant basis
    # when two eigenspaces are equivalent copies, and to 0 otherwise
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    slot = {}
    for i in range(n):
        for j in range(i + 1, n):
            score = 0.0
            for b in herm:
                x = spaces[i].conj().T @ b @ spaces[j]
                score += float(np.sum(np.abs(x) ** 2))
            slot[(i, j)] = score
            if score > 0.5:
                if spaces[i].shape[1] != spaces[j].shape[1]:
                    raise SolverError("connected eigenspaces of unequal dimension (collision)")
                parent[find(i)] = find(j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    # deterministic ordering: copies by leading basis index, blocks likewise
    ordered_groups = []
    for members in groups.values():
        members = sorted(members, key=lambda i: _leading_index(spaces[i]))
        ordered_groups.append(members)
    ordered_groups.sort(key=lambda ms: min(_leading_index(spaces[i]) for i in ms))

    blocks = []
    total_dim = 0
    total_sq = 0
    for label, members in enumerate(ordered_groups):
        dim_k = spaces[members[0]].shape[1]
        mult = len(members)
        total_dim += dim_k * mult
        total_sq += mult**2
        projectors = []
        inter = {}
        for m, i in enumerate(members):
            proj = spaces[i] @ spaces[i].conj().T
            op = SparseOperator(spec, proj)
            projectors.append(op)
            inter[(m, m)] = op
        ref = members[0]
        maps_to_ref = {0: np.eye(d, dtype=complex)}
        for m, i in enumerate(members[1:], start=1):
            best, best_norm = None, 0.0
            for b in herm:
                x = spaces[i].conj().T @ b @ spaces[ref]
                nx = np.linalg.norm(x)
                if nx > best_norm:
                    best, best_norm = x, nx
            if best is None or best_norm < 1e-6:
                raise SolverError("no direct intertwiner component found (collision)")
            gram = best.conj().T @ best
            scale = np.sqrt(np.trace(gram).real / dim_k)
            if np.linalg.norm(gram - scale**2 * np.eye(dim_k)) > 1e-8 * max(scale**2, 1.0):
                raise SolverError("intertwiner candidate is not an isometry (collision)")
            t = spaces[i] @ (best / scale) @ spaces[ref].conj().T
            flat = t.reshape(-1)
            ph = flat[int(np.argmax(np.abs(flat)))]
            t = t * (ph.conjugate() / abs(ph))
            maps_to_ref[m] = t
        for m in range(mult):
            for mp in range(mult):
                if m == mp:
                    continue
                t = maps_to_ref[m] @ maps_to_ref[mp].conj().T
                inter[(m, mp)] = SparseOperator(spec, t)
        blocks.append(
            IrrepBlock(
                label=label,
                dim_krylov=dim_k,
                multiplicity=mult,
                projectors=tuple(projectors),
                intertwiners=inter,
            )
        )

    if total_dim != d:
        raise SolverError(f"block dimensions sum to {total_dim} != {d} (collision)")
    if total_sq != dim_c:
        raise SolverError(
            f"sum of squared multiplicities {total_sq} != dim(C) = {dim_c} (collision)"
        )
    return blocks


def reconstruction_residual(decomp: IrrepDecomposition) -> float:
    """Mutual projection residual between span{Pi} and the commutant basis."""
    rows = []
    for b in decomp.blocks:
        for (m, mp), op in sorted(b.intertwiners.items()):
            rows.append(vec(op.matrix) / np.sqrt(b.dim_krylov))
    pi_span = np.array(rows)
    c_span = decomp.basis.vectors()
    worst = 0.0
    for target, source in ((pi_span, c_span), (c_span, pi_span)):
        coeff = source.conj() @ target.conj().T  # <source_i, target_j>
        recon = coeff.conj().T @ source
        worst = max(worst, float(np.max(np.linalg.norm(recon - target, axis=1))))
    return worst


# ---------------------------------------------------------------------------
# strong symmetries, stationary states, Mazur bound

@dataclass(frozen=True)
class StrongSymmetry:
    """Unitary acting as exp(i*theta) on one Krylov copy and trivially elsewhere."""

    unitary: SparseOperator
    label: int
    index: int
    theta: float


def strong_symmetry(decomp: IrrepDecomposition, label: int, n: int, theta: float) -> StrongSymmetry:
    """Phase-on-one-copy strong symmetry; ``n`` is 1-based within the block."""
    if theta == 0.0:
        raise ValueError("theta must be nonzero")
    block = next((b for b in decomp.blocks if b.label == label), None)
    if block is None:
        raise ValueError(f"no block labeled {label}")
    if not 1 <= n <= block.multiplicity:
        raise ValueError(f"copy index {n} outside 1..{block.multiplicity}")
    proj = block.projectors[n - 1].matrix
    d = decomp.spec.dim
    u = sp.identity(d, dtype=complex, format="csr") + (np.exp(1j * theta) - 1.0) * proj
    op = SparseOperator(decomp.spec, u)
    err = sp.linalg.norm(op.matrix @ op.matrix.conj().T - sp.identity(d, dtype=complex))
    if err > 1e-10:
        raise SolverError(f"strong symmetry not unitary (residual {err:.3e})")
    return StrongSymmetry(unitary=op, label=label, index=n, theta=float(theta))


def stationary_state(decomp: IrrepDecomposition, rho0: np.ndarray, psd_tol: float = 1e-10) -> np.ndarray:
    """Stationary state from the conserved overlaps of the initial condition."""
    rho0 = np.asarray(rho0, dtype=complex)
    d = decomp.spec.dim
    if rho0.shape != (d, d):
        raise ValueError(f"density matrix shape {rho0.shape}, expected {(d, d)}")
    if np.linalg.norm(rho0 - rho0.conj().T) > 1e-10:
        raise ValueError("initial state is not hermitian")
    if abs(np.trace(rho0) - 1.0) > 1e-10:
        raise ValueError("initial state does not have unit trace")
    if np.min(la.eigvalsh(rho0)) < -psd_tol:
        raise ValueError("initial state is not positive semidefinite")

    out = np.zeros((d, d), dtype=complex)
    for b in decomp.blocks:
        for m in range(b.multiplicity):
            for mp in range(b.multiplicity):
                pi_mmp = b.intertwiners[(m, mp)].matrix
                pi_mpm = b.intertwiners[(mp, m)].matrix
                overlap = (pi_mpm @ rho0).trace()
                if abs(overlap) > 1e-15:
                    out += (overlap / b.dim_krylov) * pi_mmp.toarray()
    return out


def mazur_bound(basis: CommutantBasis, obs: SparseOperator) -> float:
    """Conserved-quantity lower bound on the infinite-time autocorrelation."""
    if not obs.is_hermitian:
        raise ValueError("observable must be hermitian")
    d = basis.spec.dim
    o = vec(obs.matrix)
    total = 0.0
    for q in basis.operators:
        total += abs(np.vdot(vec(q.matrix), o)) ** 2
    return float(total / d)
