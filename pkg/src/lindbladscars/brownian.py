"""Lindbladian Brownian circuits and ensemble-averaged operator relaxation.

Heisenberg-picture circuits propagate an observable in steps of size eps with
fixed decay rates and fresh Gaussian Hamiltonian couplings of variance
``2 k_alpha / eps`` per step.  The coupling average turns the stepwise
evolution into relaxation under a deterministic positive semidefinite
superoperator whose kernel (for all-positive coefficients) is the commutant,
so the long-time autocorrelation plateau is the Mazur bound.

Per-step propagation uses exponential action evaluated by scaled Taylor
summation, batched over samples; the only systematic error left is the
finite-eps bias of the circuit itself.  Randomness is one counter-based
stream per (seed, sample), with draws ordered step-major inside the stream.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .commutant import BondAlgebra
from .errors import SolverError
from .operators import SparseOperator, SparseSuperOperator, adjoint_superop, vec

DENSE_CIRCUIT_MAX = 1024  # batched dense stepping up to this operator-space size


@dataclass(frozen=True)
class BrownianSpec:
    """Circuit specification on top of a bond algebra.

    ``variances`` maps Hamiltonian-generator labels to k_alpha > 0;
    ``rates`` maps jump labels to fixed decay rates.
    """

    algebra: BondAlgebra
    variances: dict[str, float] = field(repr=False)
    rates: dict[str, float] = field(repr=False)
    eps: float = 1e-2
    n_samples: int = 2000
    seed: int = 0

    def __post_init__(self):
        ham = set(self.algebra.labels("hamiltonian-term"))
        jmp = set(self.algebra.labels("jump-operator"))
        if set(self.variances) != ham:
            raise ValueError("variance keys must match hamiltonian-role generators")
        if set(self.rates) != jmp:
            raise ValueError("rate keys must match jump-role generators")
        if any(k <= 0 for k in self.variances.values()):
            raise ValueError("variances k_alpha must be positive")
        if self.eps <= 0:
            raise ValueError("step eps must be positive")


def from_model(model, variances=None, eps: float = 1e-2, n_samples: int = 2000, seed: int = 0) -> BrownianSpec:
    """Circuit spec for a catalog model; default variance 1/2 per Hamiltonian term."""
    var = dict(variances or {})
    for lab in model.algebra.labels("hamiltonian-term"):
        var.setdefault(lab, 0.5)
    return BrownianSpec(
        algebra=model.algebra,
        variances=var,
        rates=dict(model.rates),
        eps=eps,
        n_samples=n_samples,
        seed=seed,
    )


def d_eff(spec: BrownianSpec) -> SparseSuperOperator:
    """Deterministic relaxation generator; PSD, kernel = commutant for positive weights."""
    total = None
    for label, k in spec.variances.items():
        c = adjoint_superop(spec.algebra.operator(label)).matrix
        term = k * (c @ c)
        total = term if total is None else total + term
    for label, g in spec.rates.items():
        c = adjoint_superop(spec.algebra.operator(label)).matrix
        term = 0.5 * g * (c @ c)
        total = term if total is None else total + term
    if total is None:
        raise ValueError("the circuit needs at least one generator")
    return SparseSuperOperator(spec.algebra.spec, total)


def _diagonal_block_indices(spec: BrownianSpec, obs: SparseOperator) -> np.ndarray | None:
    """Offset-zero operator-space restriction, valid when everything conserves S^z_tot."""
    from .operators import sector_partition

    if not spec.algebra.conserves_magnetization():
        return None
    hspec = spec.algebra.spec
    d = hspec.dim
    part = sector_partition(hspec)
    blocks = []
    for _, ix in part.sectors:
        rows = np.asarray(ix, dtype=np.int64)
        blocks.append((rows[:, None] * d + rows[None, :]).ravel())
    idx = np.sort(np.concatenate(blocks))
    o = vec(obs.matrix)
    outside = np.delete(o, idx)
    if outside.size and np.max(np.abs(outside)) > 1e-14:
        return None
    return idx


def averaged_autocorrelation(spec: BrownianSpec, obs: SparseOperator, times) -> np.ndarray:
    """Deterministic infinite-temperature autocorrelation Tr[e^{-tD}(O) O] / D."""
    if not obs.is_hermitian:
        raise ValueError("observable must be hermitian")
    times = np.asarray(times, dtype=float)
    d = spec.algebra.spec.dim
    gen = d_eff(spec).matrix
    o = vec(obs.matrix)
    idx = _diagonal_block_indices(spec, obs)
    if idx is not None:
        gen = sp.csr_matrix(gen[idx][:, idx])
        o = o[idx]

    out = np.empty(len(times))
    v = o.copy()
    t_prev = 0.0
    for i, t in enumerate(np.clip(times, 0.0, None)):
        gap = t - t_prev
        if gap > 0:
            v = spla.expm_multiply(-gap * gen, v)
        out[i] = np.real(np.vdot(o, v)) / d
        t_prev = t
    return out


def stationary_autocorrelation(
    spec: BrownianSpec,
    obs: SparseOperator,
    t_start: float = 1.0,
    tol: float = 1e-10,
    max_doublings: int = 60,
) -> tuple[float, float]:
    """Plateau of the averaged autocorrelation by monotone time-doubling.

    The series is a nonnegative mixture of decaying exponentials, so it is
    nonincreasing and the doubling difference bounds the remaining tail.
    Returns (plateau value, time at which it was reached).
    """
    t = t_start
    prev = averaged_autocorrelation(spec, obs, [t])[0]
    for _ in range(max_doublings):
        cur = averaged_autocorrelation(spec, obs, [2 * t])[0]
        if prev - cur < tol:
            return float(cur), 2 * t
        prev, t = cur, 2 * t
    raise SolverError(f"autocorrelation plateau not reached by t={t:.3e}")


def sample_circuit_autocorrelation(
    spec: BrownianSpec,
    obs: SparseOperator,
    times,
    chunk_size: int = 512,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo circuit average of the autocorrelation, with standard errors."""
    if not obs.is_hermitian:
        raise ValueError("observable must be hermitian")
    times = np.asarray(times, dtype=float)
    eps = spec.eps
    steps = np.round(times / eps).astype(int)
    if np.max(np.abs(times - steps * eps)) > 1e-9 * max(eps, 1e-12):
        raise ValueError("every output time must be an integer multiple of eps")
    n_steps = int(steps[-1])
    record_at = {int(s): i for i, s in enumerate(steps)}

    d = spec.algebra.spec.dim
    ham_labels = sorted(spec.variances)
    sigmas = np.array([np.sqrt(2.0 * spec.variances[lab] / eps) for lab in ham_labels])
    adj = [adjoint_superop(spec.algebra.operator(lab)).matrix for lab in ham_labels]
    diss = None
    for lab, g in spec.rates.items():
        c = adjoint_superop(spec.algebra.operator(lab)).matrix
        term = -0.5 * g * (c @ c)
        diss = term if diss is None else diss + term
    if diss is None:
        diss = sp.csr_matrix((d * d, d * d), dtype=complex)

    o = vec(obs.matrix)
    idx = _diagonal_block_indices(spec, obs)
    if idx is not None:
        adj = [sp.csr_matrix(a[idx][:, idx]) for a in adj]
        diss = sp.csr_matrix(diss[idx][:, idx])
        o = o[idx]
    dim = o.size
    if dim > DENSE_CIRCUIT_MAX:
        raise SolverError(
            f"circuit operator space of size {dim} exceeds the dense stepping limit"
        )

    # rough stiffness warning: a typical coupling draw moves the state by
    # eps * |g| * ||h|| per step, which the continuum limit assumes is small
    h_norms = np.array(
        [spla.onenormest(spec.algebra.operator(lab).matrix) for lab in ham_labels]
    ) if ham_labels else np.zeros(0)
    if len(h_norms) and float(np.max(sigmas * h_norms)) * eps > 0.1:
        warnings.warn(
            f"eps * typical|g| * ||h|| = {float(np.max(sigmas * h_norms)) * eps:.3f} > 0.1; "
            "discretization bias may be large",
            stacklevel=2,
        )

    adj_t = np.stack([a.toarray().T for a in adj]) if adj else np.zeros((0, dim, dim), complex)
    diss_t = diss.toarray().T
    adj_1norms = np.array([np.max(np.abs(a.toarray()).sum(axis=0)) for a in adj]) if adj else np.zeros(0)
    diss_1norm = np.max(np.abs(diss.toarray()).sum(axis=0)) if diss.nnz else 0.0

    n_times = len(times)
    acc_sum = np.zeros(n_times)
    acc_sq = np.zeros(n_times)

    for start in range(0, spec.n_samples, chunk_size):
        stop = min(start + chunk_size, spec.n_samples)
        b = stop - start
        draws = np.empty((b, n_steps, len(ham_labels)))
        for j in range(b):
            gen = np.random.Generator(np.random.Philox(key=[spec.seed, start + j]))
            draws[j] = gen.standard_normal((n_steps, len(ham_labels))) * sigmas
        w = np.tile(o[None, :], (b, 1))
        corr = np.empty((b, n_times))

        def record(i):
            corr[:, i] = np.real(w @ o.conj()) / d

        if 0 in record_at:
            record(record_at[0])
        for step in range(1, n_steps + 1):
            g = draws[:, step - 1, :]
            theta = eps * (float(np.sum(np.max(np.abs(g), axis=0) * adj_1norms)) + diss_1norm)
            n_sub = max(1, int(np.ceil(theta / 2.0)))
            h = eps / n_sub

            def act(x):
                out = x @ diss_t
                for a in range(len(ham_labels)):
                    out += (1j * g[:, a])[:, None] * (x @ adj_t[a])
                return out

            for _ in range(n_sub):
                term = w
                acc = w.copy()
                for m in range(1, 40):
                    term = (h / m) * act(term)
                    acc += term
                    if np.max(np.abs(term)) < 1e-15 * max(np.max(np.abs(acc)), 1e-300):
                        break
                else:
                    raise SolverError("Taylor series for the step exponential did not converge")
                w = acc
            if step in record_at:
                record(record_at[step])

        acc_sum += corr.sum(axis=0)
        acc_sq += (corr**2).sum(axis=0)

    n = spec.n_samples
    mean = acc_sum / n
    var = (acc_sq - n * mean**2) / max(n - 1, 1)
    stderr = np.sqrt(np.maximum(var, 0.0) / n)
    return mean, stderr
