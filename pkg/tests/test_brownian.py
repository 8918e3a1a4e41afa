import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from lindbladscars.brownian import (
    BrownianSpec,
    _diagonal_block_indices,
    averaged_autocorrelation,
    d_eff,
    from_model,
    sample_circuit_autocorrelation,
    stationary_autocorrelation,
)
from lindbladscars.commutant import commutant_basis, mazur_bound, super_hamiltonian
from lindbladscars.models import build_model
from lindbladscars.operators import SparseOperator, adjoint_superop, site_operator, total_sz, vec


def test_d_eff_matches_half_super_hamiltonian():
    # k_alpha = 1/2 and gamma = 1 reproduce the frustration-free super-Hamiltonian / 2
    model = build_model("u1", 3, params={"gamma": 1.0})
    spec = BrownianSpec(
        algebra=model.algebra,
        variances={lab: 0.5 for lab in model.algebra.labels("hamiltonian-term")},
        rates={lab: 1.0 for lab in model.algebra.labels("jump-operator")},
    )
    diff = d_eff(spec).matrix - 0.5 * super_hamiltonian(model.algebra).matrix
    assert sp.linalg.norm(diff) < 1e-13


def test_d_eff_annihilates_identity():
    model = build_model("z2", 3)
    gen = d_eff(from_model(model)).matrix
    ident = np.eye(model.spec.dim, dtype=complex).reshape(-1)
    assert np.linalg.norm(gen @ ident) < 1e-12


@pytest.mark.parametrize("model_id,L", [("full", 3), ("z2", 3), ("u1", 3), ("double-z2", 2)])
def test_d_eff_kernel_dimension_equals_commutant(model_id, L):
    model = build_model(model_id, L)
    basis = commutant_basis(model.algebra)
    gen = d_eff(from_model(model)).matrix.toarray()
    w = la.eigvalsh(gen)
    assert np.min(w) > -1e-10
    assert int(np.sum(w < 1e-10 * max(w[-1], 1.0))) == basis.dim


def test_averaged_autocorrelation_limits():
    model = build_model("u1", 3)
    bspec = from_model(model)
    obs = site_operator(model.spec, "z", 2)
    series = averaged_autocorrelation(bspec, obs, [0.0])
    assert np.isclose(series[0], 1.0)  # Tr[O^2]/D for a Pauli
    conserved = total_sz(model.spec)
    flat = averaged_autocorrelation(bspec, conserved, [0.0, 0.5, 3.0])
    assert np.max(np.abs(flat - flat[0])) < 1e-10


@pytest.mark.parametrize("model_id,L", [("u1", 3), ("z2", 3), ("double-z2", 4)])
def test_stationary_value_equals_mazur_bound(model_id, L):
    model = build_model(model_id, L)
    bspec = from_model(model)
    basis = commutant_basis(model.algebra)
    obs = site_operator(model.spec, "z", 2)
    bound = mazur_bound(basis, obs)
    stat, _ = stationary_autocorrelation(bspec, obs)
    assert abs(stat - bound) < 1e-8
    assert stat >= bound - 1e-12  # nonnegative mixture of decaying exponentials


def test_dissipative_only_circuit_is_deterministic():
    model = build_model("z2", 3, params={"gamma": 0.7})
    jumps = tuple(g for g in model.algebra.generators if g[2] == "jump-operator")
    from lindbladscars.commutant import BondAlgebra

    alg = BondAlgebra(spec=model.spec, generators=jumps)
    bspec = BrownianSpec(
        algebra=alg, variances={}, rates={lab: 0.7 for lab in alg.labels("jump-operator")},
        n_samples=3, seed=0,
    )
    obs = site_operator(model.spec, "x", 1)
    times = [0.0, 0.5, 1.0]
    mean, err = sample_circuit_autocorrelation(bspec, obs, times)
    det = averaged_autocorrelation(bspec, obs, times)
    assert np.max(np.abs(mean - det)) < 1e-12
    assert np.max(err) < 1e-12


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_sampled_circuit_matches_deterministic_three_sigma():
    model = build_model("u1", 3)
    bspec = from_model(model, eps=1e-2, n_samples=800, seed=31)
    obs = site_operator(model.spec, "z", 2)
    times = np.arange(0.0, 2.01, 0.25)
    mean, err = sample_circuit_autocorrelation(bspec, obs, times)
    det = averaged_autocorrelation(bspec, obs, times)
    assert np.all(np.abs(mean - det) <= 3.0 * np.maximum(err, 1e-12))


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_sampled_circuit_deterministic_given_seed():
    model = build_model("u1", 2)
    bspec = from_model(model, eps=2e-2, n_samples=64, seed=8)
    obs = site_operator(model.spec, "z", 1)
    m1, _ = sample_circuit_autocorrelation(bspec, obs, [0.0, 0.2])
    m2, _ = sample_circuit_autocorrelation(bspec, obs, [0.0, 0.2])
    assert np.array_equal(m1, m2)


def test_times_must_align_with_eps():
    model = build_model("u1", 2)
    bspec = from_model(model, eps=1e-2, n_samples=4)
    obs = site_operator(model.spec, "z", 1)
    with pytest.raises(ValueError):
        sample_circuit_autocorrelation(bspec, obs, [0.0, 0.015])


def test_spec_validation():
    model = build_model("u1", 3)
    with pytest.raises(ValueError):
        BrownianSpec(algebra=model.algebra, variances={}, rates=dict(model.rates))
    with pytest.raises(ValueError):
        from_model(model, eps=-1.0)
    bad_var = {lab: -0.5 for lab in model.algebra.labels("hamiltonian-term")}
    with pytest.raises(ValueError):
        BrownianSpec(algebra=model.algebra, variances=bad_var, rates=dict(model.rates))


def _gauss_hermite_mean_step(model, bspec, obs, eps, order=24):
    """Exactly ensemble-averaged one-step propagator on the diagonal block."""
    idx = _diagonal_block_indices(bspec, obs)
    labels = sorted(bspec.variances)
    adj = [
        adjoint_superop(model.algebra.operator(lab)).matrix[idx][:, idx].toarray()
        for lab in labels
    ]
    diss = None
    for lab, g in bspec.rates.items():
        c = adjoint_superop(model.algebra.operator(lab)).matrix[idx][:, idx].toarray()
        term = -0.5 * g * (c @ c)
        diss = term if diss is None else diss + term
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    sigma = np.sqrt(2.0 * bspec.variances[labels[0]] / eps)
    dim = len(idx)
    mean = np.zeros((dim, dim), dtype=complex)
    for xi, wi in zip(nodes, weights):
        for xj, wj in zip(nodes, weights):
            g1, g2 = np.sqrt(2.0) * sigma * xi, np.sqrt(2.0) * sigma * xj
            mean += (wi * wj / np.pi) * la.expm(eps * (1j * (g1 * adj[0] + g2 * adj[1]) + diss))
    return mean, idx


def test_epsilon_refinement_halves_the_bias():
    # Richardson-style study on the exactly averaged circuit: the finite-step
    # bias against the continuum curve is linear in eps
    model = build_model("u1", 3)
    obs = site_operator(model.spec, "z", 2)
    t_obs = 0.2
    base = from_model(model)
    det = averaged_autocorrelation(base, obs, [t_obs])[0]
    biases = []
    for eps in (0.04, 0.02, 0.01):
        bspec = from_model(model, eps=eps)
        mean, idx = _gauss_hermite_mean_step(model, bspec, obs, eps)
        w = vec(obs.matrix)[idx]
        o = w.copy()
        for _ in range(int(round(t_obs / eps))):
            w = mean @ w
        biases.append(np.real(np.vdot(o, w)) / model.spec.dim - det)
    r1, r2 = biases[0] / biases[1], biases[1] / biases[2]
    assert 1.8 < r1 < 2.6 and 1.8 < r2 < 2.6
    assert abs(r2 - 2.0) < abs(r1 - 2.0)  # approaching the linear-bias regime


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_sampler_agrees_with_exact_finite_eps_mean():
    # the Monte Carlo circuit is an unbiased estimator of the quadrature mean
    model = build_model("u1", 3)
    obs = site_operator(model.spec, "z", 2)
    eps, t_obs = 0.04, 0.2
    bspec = from_model(model, eps=eps, n_samples=4000, seed=77)
    mean_step, idx = _gauss_hermite_mean_step(model, bspec, obs, eps)
    w = vec(obs.matrix)[idx]
    o = w.copy()
    for _ in range(int(round(t_obs / eps))):
        w = mean_step @ w
    exact_mean = np.real(np.vdot(o, w)) / model.spec.dim
    sampled, err = sample_circuit_autocorrelation(bspec, obs, [0.0, t_obs])
    assert abs(sampled[1] - exact_mean) <= 3.0 * err[1]
