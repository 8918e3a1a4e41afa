import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from lindbladscars.commutant import (
    BondAlgebra,
    commutant_basis,
    irrep_decomposition,
    max_commutator_residual,
    mazur_bound,
    reconstruction_residual,
    stationary_state,
    strong_symmetry,
    super_hamiltonian,
)
from lindbladscars.models import build_model, scar_state, ScarStateSpec, product_state
from lindbladscars.operators import (
    HilbertSpec,
    SparseOperator,
    embed,
    local_operator,
    site_operator,
    total_sz,
    vec,
)
from lindbladscars.dynamics import density_matrix


def algebra_from(spec, ops):
    gens = tuple((f"g{i}", op, "hamiltonian-term") for i, op in enumerate(ops))
    return BondAlgebra(spec=spec, generators=gens)


def test_kernel_of_single_site_dephasing():
    # operators commuting with both sigma^z's are the diagonal ones
    spec = HilbertSpec(2, 2)
    alg = algebra_from(spec, [site_operator(spec, "z", 1), site_operator(spec, "z", 2)])
    basis = commutant_basis(alg)
    assert basis.dim == 4
    for q in basis.operators:
        off = q.matrix - sp.diags(q.matrix.diagonal())
        assert sp.linalg.norm(off) < 1e-12


def test_kernel_of_one_generator_only():
    # [A, sigma^z_1] = 0 leaves a P_up/P_down block structure: dim 2 * 4
    spec = HilbertSpec(2, 2)
    alg = algebra_from(spec, [site_operator(spec, "z", 1)])
    assert commutant_basis(alg).dim == 8


def test_full_pauli_algebra_trivial_commutant(basis_of):
    assert basis_of("full", 3).dim == 1


def test_super_hamiltonian_positive_semidefinite():
    rng = np.random.default_rng(17)
    for _ in range(20):
        spec = HilbertSpec(2, 2)
        ops = []
        for _ in range(rng.integers(1, 4)):
            a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            site = int(rng.integers(1, 3))
            ops.append(embed([(site, (a + a.conj().T) / 2)], spec))
        p = super_hamiltonian(algebra_from(spec, ops)).matrix.toarray()
        assert np.min(la.eigvalsh(p)) > -1e-12


@pytest.mark.parametrize(
    "model_id,L,expected",
    [
        ("full", 3, 1),
        ("z2", 3, 2),
        ("double-z2", 4, 4),
        ("u1", 4, 5),
        ("isolated-1", 4, 2),
        ("isolated-2", 4, 3),
        ("tower-1", 3, 9),
    ],
)
def test_catalog_commutant_dimensions(basis_of, model_id, L, expected):
    assert basis_of(model_id, L).dim == expected


def test_commutant_membership_and_orthonormality(model_of, basis_of):
    model = model_of("isolated-2", 4)
    basis = basis_of("isolated-2", 4)
    assert max_commutator_residual(model.algebra, basis) < 1e-10
    vecs = basis.vectors()
    gram = vecs.conj() @ vecs.T
    assert np.linalg.norm(gram - np.eye(basis.dim)) < 1e-10
    assert basis.gap > 1e-3


def test_commutant_commutes_with_random_words(model_of, basis_of):
    model = model_of("u1", 3)
    basis = basis_of("u1", 3)
    rng = np.random.default_rng(23)
    gens = [op.matrix for _, op, _ in model.algebra.generators]
    for _ in range(50):
        word = sp.identity(model.spec.dim, dtype=complex, format="csr")
        for idx in rng.integers(0, len(gens), size=rng.integers(1, 4)):
            word = word @ gens[idx]
        for q in basis.operators:
            resid = sp.linalg.norm(q.matrix @ word - word @ q.matrix)
            assert resid < 1e-9 * max(sp.linalg.norm(word), 1.0)


def test_commutant_basis_deterministic(model_of):
    model = model_of("u1", 3)
    b1 = commutant_basis(model.algebra, seed=0)
    b2 = commutant_basis(model.algebra, seed=99)
    assert all(
        np.array_equal(q1.matrix.toarray(), q2.matrix.toarray())
        for q1, q2 in zip(b1.operators, b2.operators)
    )


def test_solver_paths_agree(model_of):
    model = model_of("z2", 3)
    dense = commutant_basis(model.algebra, method="dense")
    lanczos = commutant_basis(model.algebra, method="shift-invert")
    lob = commutant_basis(model.algebra, method="lobpcg")
    span = dense.vectors()
    for other in (lanczos, lob):
        assert other.dim == dense.dim
        v = other.vectors()
        proj = v.conj() @ span.T
        assert np.linalg.norm(proj.conj().T @ v - span) < 1e-7


def test_isolated_model_block_structure(decomposition_of):
    for L in (3, 4):
        dec1 = decomposition_of("isolated-1", L)
        dims1 = sorted((b.dim_krylov, b.multiplicity) for b in dec1.blocks)
        assert dims1 == [(1, 1), (2**L - 1, 1)]
        dec2 = decomposition_of("isolated-2", L)
        dims2 = sorted((b.dim_krylov, b.multiplicity) for b in dec2.blocks)
        assert dims2 == [(1, 1), (1, 1), (2**L - 2, 1)]


@pytest.mark.parametrize("model_id,L", [
    ("full", 4), ("z2", 4), ("double-z2", 4), ("u1", 4),
    ("isolated-1", 4), ("isolated-2", 5), ("tower-1", 3), ("tower-2", 4),
])
def test_block_dimensions_complete(decomposition_of, basis_of, model_id, L):
    dec = decomposition_of(model_id, L)
    basis = basis_of(model_id, L)
    assert sum(b.dim_krylov * b.multiplicity for b in dec.blocks) == dec.spec.dim
    assert sum(b.multiplicity**2 for b in dec.blocks) == basis.dim
    # abelian commutant: number of Krylov subspaces equals dim(C)
    assert sum(b.multiplicity for b in dec.blocks) == basis.dim
    assert reconstruction_residual(dec) < 1e-8


def test_projector_idempotency_and_orthogonality(decomposition_of):
    dec = decomposition_of("u1", 4)
    projs = [b.projectors[0].to_dense() for b in dec.blocks]
    for i, p in enumerate(projs):
        assert np.linalg.norm(p @ p - p) < 1e-10
        for q in projs[i + 1:]:
            assert np.linalg.norm(p @ q) < 1e-10


def test_nonabelian_intertwiners():
    spec = HilbertSpec(2, 2)
    alg = BondAlgebra(
        spec=spec, generators=(("z1", site_operator(spec, "z", 1), "jump-operator"),)
    )
    basis = commutant_basis(alg)
    assert basis.dim == 8
    dec = irrep_decomposition(alg, basis)
    assert sorted(b.multiplicity for b in dec.blocks) == [2, 2]
    assert sum(b.dim_krylov * b.multiplicity for b in dec.blocks) == 4
    assert reconstruction_residual(dec) < 1e-8
    for b in dec.blocks:
        pi01 = b.intertwiners[(0, 1)].to_dense()
        pi10 = b.intertwiners[(1, 0)].to_dense()
        assert np.linalg.norm(pi01.conj().T - pi10) < 1e-10
        assert np.linalg.norm(pi01 @ pi10 - b.projectors[0].to_dense()) < 1e-10


def test_strong_symmetry_full_turn_is_identity(decomposition_of):
    dec = decomposition_of("u1", 3)
    s = strong_symmetry(dec, dec.blocks[1].label, 1, 2 * np.pi)
    ident = np.eye(dec.spec.dim)
    assert np.linalg.norm(s.unitary.to_dense() - ident) < 1e-12


def test_strong_symmetry_commutes_with_generators(model_of, decomposition_of):
    model = model_of("u1", 3)
    dec = decomposition_of("u1", 3)
    s = strong_symmetry(dec, dec.blocks[0].label, 1, 0.7)
    u = s.unitary.matrix
    for _, g, _ in model.algebra.generators:
        assert sp.linalg.norm(u @ g.matrix - g.matrix @ u) < 1e-10


def test_strong_symmetry_fingerprints_label_krylov_spaces(decomposition_of):
    dec = decomposition_of("u1", 4)
    subspaces = [(b.label, m, b.projectors[m]) for b in dec.blocks for m in range(b.multiplicity)]
    rows = []
    for b in dec.blocks:
        for n in range(1, b.multiplicity + 1):
            s = strong_symmetry(dec, b.label, n, 1.3)
            row = [
                complex((s.unitary.matrix @ p.matrix).trace() / p.matrix.trace())
                for (_, _, p) in subspaces
            ]
            rows.append(np.round(row, 10))
    columns = [tuple(r[i] for r in rows) for i in range(len(subspaces))]
    assert len(set(columns)) == len(columns)


def test_strong_symmetry_validation(decomposition_of):
    dec = decomposition_of("u1", 3)
    with pytest.raises(ValueError):
        strong_symmetry(dec, dec.blocks[0].label, 1, 0.0)
    with pytest.raises(ValueError):
        strong_symmetry(dec, dec.blocks[0].label, 5, 1.0)
    with pytest.raises(ValueError):
        strong_symmetry(dec, 99, 1, 1.0)


def test_stationary_state_fixes_the_scar(decomposition_of, model_of):
    dec = decomposition_of("isolated-1", 4)
    spec = model_of("isolated-1", 4).spec
    up = scar_state(ScarStateSpec("ferromagnet-up", spec))
    rho = density_matrix(up)
    assert np.linalg.norm(stationary_state(dec, rho) - rho) < 1e-10


def test_stationary_state_orthogonal_start_hits_thermal(decomposition_of, model_of):
    dec = decomposition_of("isolated-2", 4)
    spec = model_of("isolated-2", 4).spec
    psi = product_state(spec, "udud")
    rho_ss = stationary_state(dec, density_matrix(psi))
    up = scar_state(ScarStateSpec("ferromagnet-up", spec))
    dn = scar_state(ScarStateSpec("ferromagnet-down", spec))
    expected = (np.eye(16) - np.outer(up, up.conj()) - np.outer(dn, dn.conj())) / 14.0
    assert np.linalg.norm(rho_ss - expected) < 1e-10


def test_stationary_state_traces(decomposition_of, random_rho):
    dec = decomposition_of("z2", 3)
    rng = np.random.default_rng(31)
    for _ in range(20):
        rho = random_rho(8, rng)
        out = stationary_state(dec, rho)
        assert abs(np.trace(out) - 1.0) < 1e-10
        assert np.linalg.norm(out - out.conj().T) < 1e-10


def test_stationary_state_input_validation(decomposition_of):
    dec = decomposition_of("z2", 3)
    bad = np.eye(8, dtype=complex) / 8.0
    bad[0, 1] = 0.5  # not hermitian
    with pytest.raises(ValueError):
        stationary_state(dec, bad)
    with pytest.raises(ValueError):
        stationary_state(dec, np.eye(8, dtype=complex))  # trace 8


def test_mazur_bound_full_weight_for_conserved(basis_of, model_of):
    basis = basis_of("u1", 4)
    spec = model_of("u1", 4).spec
    mz = total_sz(spec)
    # sigma^z_tot lies in the commutant: full weight Tr[O^2]/D = L by enumeration
    digits = np.array([bin(i).count("1") for i in range(16)])
    traces = np.sum((4 - 2 * digits) ** 2)
    assert np.isclose(traces / 16.0, 4.0)
    assert np.isclose(mazur_bound(basis, mz), 4.0, atol=1e-10)


def test_mazur_bound_vanishes_off_commutant(basis_of, model_of):
    basis = basis_of("u1", 4)
    spec = model_of("u1", 4).spec
    assert mazur_bound(basis, site_operator(spec, "x", 1)) < 1e-20


def test_mazur_bound_requires_hermitian(basis_of, model_of):
    spec = model_of("u1", 4).spec
    with pytest.raises(ValueError):
        mazur_bound(basis_of("u1", 4), site_operator(spec, "+", 1))


def test_tower_commutant_matches_analytic_span(model_of, basis_of):
    # independent oracle: sector projectors and tower projectors assembled by hand
    from lindbladscars.models import tower_state
    from lindbladscars.operators import sector_partition

    L = 3
    model = model_of("tower-1", L)
    basis = basis_of("tower-1", L)
    spec = model.spec
    part = sector_partition(spec)
    analytic = []
    scar_sectors = {-L + 2 * n: n for n in range(L + 1)}
    for m, idx in part.sectors:
        proj = np.zeros((spec.dim, spec.dim), dtype=complex)
        proj[np.asarray(idx), np.asarray(idx)] = 1.0
        if m in scar_sectors:
            psi = tower_state(spec, scar_sectors[m])
            scar = np.outer(psi, psi.conj())
            analytic.append(scar)
            rest = proj - scar
            if np.linalg.norm(rest) > 1e-12:
                analytic.append(rest)
        else:
            analytic.append(proj)
    assert len(analytic) == 3 * L == basis.dim
    # every analytic element commutes with all generators
    for a in analytic:
        for _, g, _ in model.algebra.generators:
            gm = g.to_dense()
            assert np.linalg.norm(a @ gm - gm @ a) < 1e-10
    # and the numerical kernel lies in the analytic span
    rows = np.array([a.reshape(-1) for a in analytic])
    q, _ = np.linalg.qr(rows.conj().T)
    for kvec in basis.vectors():
        resid = np.linalg.norm(kvec - q @ (q.conj().T @ kvec))
        assert resid < 1e-8
