"""Liouvillian construction, exact and trajectory evolution, scar diagnostics.

Exact evolution integrates the vectorized master equation with matrix
exponential action on the (optionally sector-restricted) Liouvillian when the
operator-space dimension is at most 16384, and with adaptive RK45 at relative
tolerance 1e-8 beyond.  The trajectory solver is the first-order unraveling
for hermitian jumps: per step a jump channel fires with probability
``gamma_j dt <l_j^2>``, otherwise the state drifts under
``exp((-iH - 1/2 sum_j gamma_j l_j^2) dt)`` and is renormalized.  Trajectory
randomness comes from one counter-based stream per (seed, trajectory index),
so ensembles are reproducible regardless of chunking or thread count.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .commutant import BondAlgebra
from .errors import SolverError
from .models import LindbladModel, exchange_term, singlet_check
from .operators import (
    HilbertSpec,
    SparseOperator,
    SparseSuperOperator,
    embed,
    local_operator,
    vec,
    sector_partition,
)

EXPM_MAX_DIM = 16384  # operator-space size up to which exponential action is used
RK_RTOL = 1e-8
RK_ATOL = 1e-12
TRACE_TOL = 1e-7


def density_matrix(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def liouvillian(model: LindbladModel) -> SparseSuperOperator:
    """Vectorized generator -i[H, .] - 1/2 sum_j gamma_j [l_j, [l_j, .]]."""
    mat = _liouvillian_matrix(model, None)
    return SparseSuperOperator(model.spec, mat)


def _commutator_superop(mat: sp.csr_matrix) -> sp.csr_matrix:
    n = mat.shape[0]
    ident = sp.identity(n, dtype=complex, format="csr")
    return sp.kron(mat, ident, format="csr") - sp.kron(ident, mat.T, format="csr")


def _liouvillian_matrix(model: LindbladModel, indices: np.ndarray | None) -> sp.csr_matrix:
    h = model.hamiltonian().matrix
    jumps = [(op.matrix, g) for _, op, g in model.jumps()]
    if indices is not None:
        h = sp.csr_matrix(h[np.ix_(indices, indices)])
        jumps = [(sp.csr_matrix(m[np.ix_(indices, indices)]), g) for m, g in jumps]
    total = -1j * _commutator_superop(h)
    for m, g in jumps:
        c = _commutator_superop(m)
        total = total - 0.5 * g * (c @ c)
    return sp.csr_matrix(total)


@dataclass
class EvolutionResult:
    """Time series of density matrices and/or sampled observables.

    ``states`` live in the working basis; ``basis_indices`` maps it back to
    the full chain when a sector restriction was used.  Trajectory runs fill
    ``observables``/``fidelity`` with (mean, standard error) pairs.
    """

    times: np.ndarray
    states: list[np.ndarray] | None
    method: str
    basis_indices: np.ndarray | None = None
    observables: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    fidelity: tuple[np.ndarray, np.ndarray] | None = None
    n_traj: int | None = None
    seed: int | None = None

    def restrict_vector(self, psi: np.ndarray) -> np.ndarray:
        psi = np.asarray(psi, dtype=complex)
        if self.basis_indices is None:
            return psi
        outside = np.linalg.norm(np.delete(psi, self.basis_indices))
        if outside > 1e-10:
            raise ValueError(f"vector has weight {outside:.3e} outside the evolved sector")
        return psi[self.basis_indices]

    def restrict_matrix(self, mat) -> np.ndarray:
        dense = mat.to_dense() if isinstance(mat, SparseOperator) else np.asarray(mat)
        if self.basis_indices is None:
            return dense
        return dense[np.ix_(self.basis_indices, self.basis_indices)]


def _resolve_sector(model: LindbladModel, rho0: np.ndarray, sector) -> np.ndarray | None:
    """Map a sector request to basis indices; 'auto' detects a single occupied sector."""
    if sector is None:
        return None
    part = sector_partition(model.spec)
    if not model.algebra.conserves_magnetization():
        raise ValueError("sector restriction requested for a non-conserving model")
    if sector == "auto":
        diag = np.real(np.diag(rho0))
        weights = [(m, float(diag[np.asarray(ix)].sum())) for m, ix in part.sectors]
        m_best, w_best = max(weights, key=lambda t: t[1])
        if w_best < 1.0 - 1e-12:
            return None  # weight spread over sectors, no restriction possible
        sector = m_best
    indices = part.indices(int(sector))
    mask = np.zeros(model.spec.dim, dtype=bool)
    mask[indices] = True
    outside = rho0.copy()
    outside[np.ix_(mask, mask)] = 0.0
    leak = float(np.max(np.abs(outside))) if outside.size else 0.0
    if leak > 1e-12:
        raise ValueError(f"initial state has weight {leak:.3e} outside sector M={sector}")
    return indices


def evolve_exact(
    model: LindbladModel,
    rho0: np.ndarray,
    times,
    sector=None,
    method: str | None = None,
) -> EvolutionResult:
    """Exact master-equation evolution sampled on an explicit time grid."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("times must be a nonempty strictly increasing nonnegative grid")
    rho0 = np.asarray(rho0, dtype=complex)
    d = model.spec.dim
    if rho0.shape != (d, d):
        raise ValueError(f"initial state shape {rho0.shape}, expected {(d, d)}")

    indices = _resolve_sector(model, rho0, sector)
    work = rho0 if indices is None else rho0[np.ix_(indices, indices)]
    lmat = _liouvillian_matrix(model, indices)
    dim2 = lmat.shape[0]
    if method is None:
        method = "expm" if dim2 <= EXPM_MAX_DIM else "rk45"

    v = work.reshape(-1)
    out = []
    if method == "expm":
        t_prev = 0.0
        diffs = np.diff(times)
        uniform = len(times) > 2 and np.allclose(diffs, diffs[0], rtol=1e-12, atol=1e-15)
        if uniform:
            if times[0] > 0:
                v = spla.expm_multiply(lmat * times[0], v)
            out.append(v.copy())
            states = spla.expm_multiply(
                lmat, v, start=0.0, stop=float(times[-1] - times[0]), num=len(times), endpoint=True
            )
            out = [states[i] for i in range(len(times))]
        else:
            for t in times:
                gap = t - t_prev
                if gap > 0:
                    v = spla.expm_multiply(lmat * gap, v)
                out.append(v.copy())
                t_prev = t
    elif method == "rk45":
        sol = solve_ivp(
            lambda _, y: lmat @ y,
            (0.0, float(times[-1])),
            v,
            t_eval=times,
            method="RK45",
            rtol=RK_RTOL,
            atol=RK_ATOL,
        )
        if not sol.success:
            raise SolverError(f"RK45 integration failed: {sol.message}")
        out = [sol.y[:, i] for i in range(len(times))]
    else:
        raise ValueError(f"unknown method {method!r}")

    n = int(np.sqrt(dim2))
    states = [w.reshape(n, n) for w in out]
    for i, s in enumerate(states):
        terr = abs(np.trace(s) - 1.0)
        herr = np.linalg.norm(s - s.conj().T)
        if terr > TRACE_TOL or herr > TRACE_TOL:
            raise SolverError(
                f"state at t={times[i]:.6g} violates trace/hermiticity "
                f"(trace err {terr:.2e}, herm err {herr:.2e})"
            )
    return EvolutionResult(times=times, states=states, method=method, basis_indices=indices)


def fidelity_series(result: EvolutionResult, psi0: np.ndarray) -> np.ndarray:
    """F(t) = <psi0| rho(t) |psi0>."""
    if result.states is None:
        if result.fidelity is None:
            raise ValueError("result carries neither states nor sampled fidelities")
        return result.fidelity[0]
    psi = result.restrict_vector(psi0)
    out = np.array([np.real(np.vdot(psi, s @ psi)) for s in result.states])
    if np.any(out < -1e-8) or np.any(out > 1 + 1e-8):
        raise SolverError("fidelity left [0, 1] beyond tolerance")
    return out


def observable_series(result: EvolutionResult, obs) -> np.ndarray:
    """<O>(t) along an exact evolution."""
    mat = result.restrict_matrix(obs)
    return np.array([np.real(np.trace(mat @ s)) for s in result.states])


def plateau(series: np.ndarray, fraction: float = 0.1) -> tuple[float, float]:
    """Mean over the final fraction of the grid, with the max-min spread."""
    tail = np.asarray(series)[-max(1, int(len(series) * fraction)):]
    return float(np.mean(tail)), float(np.max(tail) - np.min(tail))


# ---------------------------------------------------------------------------
# quantum trajectories

def _spectral_bound(mat: sp.csr_matrix) -> float:
    return float(spla.onenormest(mat))


def evolve_trajectories(
    model: LindbladModel,
    psi0: np.ndarray,
    times,
    n_traj: int,
    dt: float | None = None,
    seed: int = 0,
    observables: dict[str, SparseOperator] | None = None,
    fidelity_ref: np.ndarray | None = None,
    sector=None,
    n_threads: int = 1,
    chunk_size: int = 256,
) -> EvolutionResult:
    """First-order jump/no-jump unraveling averaged over ``n_traj`` pure states."""
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0:
        raise ValueError("trajectory grids must start at t = 0")
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("initial state must be normalized")

    rho0 = density_matrix(psi0)
    indices = _resolve_sector(model, rho0, sector)
    if indices is not None:
        psi0 = psi0[indices]
    h = model.hamiltonian().matrix
    jumps = [(op.matrix, g) for _, op, g in model.jumps()]
    if indices is not None:
        h = sp.csr_matrix(h[np.ix_(indices, indices)])
        jumps = [(sp.csr_matrix(m[np.ix_(indices, indices)]), g) for m, g in jumps]

    rates = np.array([g for _, g in jumps])
    if dt is None:
        dt = 1e-3 / max(rates.max(), 1e-12) if len(rates) else 1e-3
    jump_scale = max((g * _spectral_bound(m @ m) for m, g in jumps), default=0.0)
    stiff = max(jump_scale, _spectral_bound(h))
    if dt * stiff > 0.05:
        warnings.warn(
            f"dt * max(gamma ||l||^2, ||H||) = {dt * stiff:.3f} > 0.05; "
            "first-order unraveling may be inaccurate",
            stacklevel=2,
        )

    steps = np.round(times / dt).astype(int)
    if np.max(np.abs(times - steps * dt)) > 1e-6 * max(dt, 1e-12):
        raise ValueError("every output time must be an integer multiple of dt")
    n_steps = int(steps[-1])
    record_at = {int(s): i for i, s in enumerate(steps)}

    drift_gen = -1j * h.toarray()
    for m, g in jumps:
        drift_gen -= 0.5 * g * (m @ m).toarray()
    drift = la.expm(drift_gen * dt)

    l_ops = [m for m, _ in jumps]
    l2_ops = [sp.csr_matrix(m @ m) for m in l_ops]
    fid_ref = psi0 if fidelity_ref is None else np.asarray(fidelity_ref, dtype=complex)
    if indices is not None and fidelity_ref is not None:
        fid_ref = fidelity_ref[indices]
    obs_mats = {}
    for label, op in (observables or {}).items():
        mat = op.matrix if isinstance(op, SparseOperator) else sp.csr_matrix(op)
        if indices is not None:
            mat = sp.csr_matrix(mat[np.ix_(indices, indices)])
        obs_mats[label] = mat

    n_times = len(times)
    dim = len(psi0)
    labels = ["fidelity"] + list(obs_mats)
    rho_sum = [np.zeros((dim, dim), dtype=complex) for _ in range(n_times)]

    def run_chunk(start: int, stop: int):
        b = stop - start
        states = np.tile(psi0[:, None], (1, b))
        uniforms = np.empty((n_steps, b))
        for j in range(b):
            gen = np.random.Generator(np.random.Philox(key=[seed, start + j]))
            uniforms[:, j] = gen.random(n_steps)
        samples = {lab: np.zeros((n_times, b)) for lab in labels}
        rhos = [np.zeros((dim, dim), dtype=complex) for _ in range(n_times)]

        def record(time_index: int):
            samples["fidelity"][time_index] = np.abs(fid_ref.conj() @ states) ** 2
            for lab, mat in obs_mats.items():
                samples[lab][time_index] = np.real(
                    np.einsum("ib,ib->b", states.conj(), mat @ states)
                )
            rhos[time_index] += states @ states.conj().T

        if 0 in record_at:
            record(record_at[0])
        for step in range(1, n_steps + 1):
            probs = np.empty((len(l_ops), b))
            for c, l2 in enumerate(l2_ops):
                probs[c] = rates[c] * dt * np.real(
                    np.einsum("ib,ib->b", states.conj(), l2 @ states)
                )
            total = probs.sum(axis=0)
            if np.any(total >= 1.0):
                raise SolverError("jump probability reached 1; decrease dt")
            u = uniforms[step - 1]
            new = drift @ states
            cum = np.cumsum(probs, axis=0)
            jumped = u < total
            if np.any(jumped):
                which = np.argmax(u[None, :] < cum, axis=0)
                for c, l in enumerate(l_ops):
                    mask = jumped & (which == c)
                    if np.any(mask):
                        new[:, mask] = l @ states[:, mask]
            states = new / np.linalg.norm(new, axis=0)
            if step in record_at:
                record(record_at[step])
        return samples, rhos

    chunks = [(a, min(a + chunk_size, n_traj)) for a in range(0, n_traj, chunk_size)]
    if n_threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(lambda ab: run_chunk(*ab), chunks))
    else:
        results = [run_chunk(a, b) for a, b in chunks]
    # reassemble per-trajectory samples in index order before reducing, so the
    # ensemble statistics do not depend on chunking or thread scheduling
    assembled = {
        lab: np.concatenate([res[0][lab] for res in results], axis=1) for lab in labels
    }
    for _, rhos in results:
        for i in range(n_times):
            rho_sum[i] += rhos[i]

    means = {lab: assembled[lab].mean(axis=1) for lab in labels}
    stderrs = {
        lab: np.std(assembled[lab], axis=1, ddof=1) / np.sqrt(n_traj)
        if n_traj > 1
        else np.zeros(n_times)
        for lab in labels
    }
    states_avg = [r / n_traj for r in rho_sum]

    return EvolutionResult(
        times=times,
        states=states_avg,
        method=f"trajectories(n_traj={n_traj}, seed={seed})",
        basis_indices=indices,
        observables={lab: (means[lab], stderrs[lab]) for lab in obs_mats},
        fidelity=(means["fidelity"], stderrs["fidelity"]),
        n_traj=n_traj,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# coherence machinery

def _as_matrix(op) -> np.ndarray:
    if isinstance(op, SparseOperator):
        return op.to_dense()
    return np.asarray(op, dtype=complex)


def _check_conserved(algebra: BondAlgebra, proj: np.ndarray, tol: float = 1e-8):
    for label, g, _ in algebra.generators:
        gm = g.to_dense()
        resid = np.linalg.norm(proj @ gm - gm @ proj)
        if resid > tol * max(np.linalg.norm(gm), 1.0):
            raise ValueError(f"projector does not commute with generator {label!r} ({resid:.2e})")


def coherence_norm_series(
    model: LindbladModel,
    rho0: np.ndarray,
    proj_scar,
    proj_thermal,
    times,
    sector=None,
) -> np.ndarray:
    """Squared Hilbert-Schmidt norm of Pi_s rho(t) Pi_th along the evolution."""
    ps = _as_matrix(proj_scar)
    pth = _as_matrix(proj_thermal)
    _check_conserved(model.algebra, ps)
    _check_conserved(model.algebra, pth)
    result = evolve_exact(model, rho0, times, sector=sector)
    ps_r = result.restrict_matrix(ps)
    pth_r = result.restrict_matrix(pth)
    return np.array([np.linalg.norm(ps_r @ s @ pth_r) ** 2 for s in result.states])


@dataclass(frozen=True)
class EffectivePair:
    """H1 (hermitian) and H2 (hermitian PSD) driving scar-thermal coherences."""

    h1: SparseOperator
    h2: SparseOperator
    hamiltonian_eigenvalues: dict[str, float]
    jump_eigenvalues: dict[str, float]

    def generator(self) -> np.ndarray:
        """Dense -i H1 - 1/2 H2 acting by left multiplication on coherences."""
        return -1j * self.h1.to_dense() - 0.5 * self.h2.to_dense()


def effective_pair(model: LindbladModel, psi: np.ndarray, n_check: int = 10, seed: int = 0) -> EffectivePair:
    """Effective Hamiltonians for a singlet, verified against the full generator."""
    checks = singlet_check(model.algebra, psi)
    failed = [lab for lab, v in checks.items() if v is None]
    if failed:
        raise ValueError(f"state is not a singlet; failing generators: {failed}")

    spec = model.spec
    d = spec.dim
    ident = sp.identity(d, dtype=complex, format="csr")
    h1 = sp.csr_matrix((d, d), dtype=complex)
    eps = {}
    for label, coupling in model.couplings.items():
        e = checks[label]
        eps[label] = e
        h1 = h1 + coupling * (model.algebra.operator(label).matrix - e * ident)
    h2 = sp.csr_matrix((d, d), dtype=complex)
    lam = {}
    for label, op, g in model.jumps():
        lv = checks[label]
        lam[label] = lv
        shifted = op.matrix - lv * ident
        h2 = h2 + g * (shifted @ shifted)

    pair = EffectivePair(
        h1=SparseOperator(spec, h1),
        h2=SparseOperator(spec, h2),
        hamiltonian_eigenvalues=eps,
        jump_eigenvalues=lam,
    )
    if np.min(la.eigvalsh(pair.h2.to_dense())) < -1e-10:
        raise SolverError("H2 is not positive semidefinite")

    # the generator must act on thermal-scar coherences by left multiplication
    rng = np.random.default_rng(seed)
    lmat = _liouvillian_matrix(model, None)
    ps = density_matrix(psi)
    pth = np.eye(d) - ps
    heff = pair.generator()
    for _ in range(n_check):
        r = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        coh = pth @ r @ ps
        lhs = (lmat @ coh.reshape(-1)).reshape(d, d)
        rhs = heff @ coh
        if np.linalg.norm(lhs - rhs) > 1e-10 * max(np.linalg.norm(rhs), 1.0):
            raise SolverError("effective generator mismatch on thermal-scar coherences")
    return pair


def coherence_rate_check(
    model: LindbladModel,
    rho0: np.ndarray,
    psi: np.ndarray,
    t: float,
    h: float = 1e-4,
) -> tuple[float, float]:
    """Numerical d/dt of the coherence norm vs the closed form from H_eff."""
    pair = effective_pair(model, psi)
    d = model.spec.dim
    ps = density_matrix(psi)
    pth = np.eye(d) - ps

    def norm_sq(time: float) -> float:
        if time <= 0:
            mat = rho0
        else:
            mat = evolve_exact(model, rho0, np.array([time])).states[0]
        return float(np.linalg.norm(ps @ mat @ pth) ** 2)

    def central(hh: float) -> float:
        if t - hh < 0:  # second-order one-sided stencil at the boundary
            return (-3 * norm_sq(t) + 4 * norm_sq(t + hh) - norm_sq(t + 2 * hh)) / (2 * hh)
        return (norm_sq(t + hh) - norm_sq(t - hh)) / (2 * hh)

    heff = pair.generator()
    prop = la.expm(heff * t)
    a = pth @ rho0 @ ps
    h2 = pair.h2.to_dense()
    rhs = -float(np.real(np.trace(ps @ rho0 @ pth @ prop.conj().T @ h2 @ prop @ a)))

    lhs = central(h)
    if abs(lhs - rhs) > 1e-6 * max(1.0, abs(rhs)):
        fine = central(h / 2)
        lhs = (4 * fine - lhs) / 3  # Richardson fallback
    return lhs, rhs


def heisenberg_map_check(L: int, gamma: float = 1.0) -> float:
    """Deviation of the spin-flip-rotated restricted H2 from the Heisenberg form.

    Uniform rates, periodic boundary, even L; the restriction is to the
    subspace with no local |0>, identified site-by-site with a spin-1/2 chain.
    """
    if L % 2:
        raise ValueError("the mapping needs even L")
    spec = HilbertSpec(L, 3, boundary="periodic")
    d = spec.dim
    h2 = sp.csr_matrix((d, d), dtype=complex)
    for j in range(1, L + 1):
        lj = exchange_term(spec, j).matrix
        h2 = h2 + gamma * (lj @ lj)

    # restriction: keep basis states whose base-3 digits avoid the middle level
    idx = np.arange(d)
    keep = np.ones(d, dtype=bool)
    for j in range(L):
        keep &= ((idx // 3 ** (L - 1 - j)) % 3) != 1
    sub = idx[keep]
    h2_r = h2[np.ix_(sub, sub)].toarray()

    half = HilbertSpec(L, 2, boundary="periodic")
    tau = {a: local_operator(a, 2) / 2.0 for a in ("x", "y", "z")}
    heis = np.zeros((2**L, 2**L), dtype=complex)
    for j in range(1, L + 1):
        dot = sum(
            (embed([(j, tau[a]), (j + 1, tau[a])], half).to_dense() for a in ("x", "y", "z")),
            np.zeros((2**L, 2**L), dtype=complex),
        )
        heis += 0.25 * np.eye(2**L) - dot

    phases = np.ones(2**L, dtype=complex)
    idx2 = np.arange(2**L)
    for j in range(1, L + 1, 2):  # odd sites rotate by pi around z
        digit = (idx2 // 2 ** (L - j)) % 2
        phases *= np.where(digit == 0, np.exp(-1j * np.pi / 2), np.exp(1j * np.pi / 2))
    u = np.diag(phases)

    return float(np.linalg.norm(u.conj().T @ h2_r @ u - 2.0 * gamma * heis))


# ---------------------------------------------------------------------------
# short-time expansions

EXCHANGE_TWO_SITE_NORM = 2.0  # largest |eigenvalue| of the spin-1 XX+YY bond term


def bimagnon_second_moment(L: int, k: float) -> float:
    """Exact per-bond second moment of the exchange term on an (n, k) bimagnon state."""
    return (4.0 / L) * np.cos(k / 2.0) ** 2


def aqmbs_fidelity_first_derivative(L: int, k: float, exchange_rates) -> float:
    """Closed-form dF/dt at t=0 when the exchange terms are the jump operators."""
    return -bimagnon_second_moment(L, k) * float(np.sum(exchange_rates))


def aqmbs_fidelity_second_derivative(L: int, k: float, exchange_couplings) -> float:
    """Closed-form d2F/dt2 at t=0 when the exchange terms appear only in H."""
    sq = float(np.sum(np.asarray(exchange_couplings) ** 2))
    return -2.0 * bimagnon_second_moment(L, k) * sq


def observable_rate_bound(
    L: int,
    k: float,
    exchange_couplings,
    exchange_rates,
    op_norm: float = 1.0,
    exchange_norm: float = EXCHANGE_TWO_SITE_NORM,
) -> float:
    """Upper bound on |d<O_l>/dt| at t=0 from an (n, k) bimagnon state."""
    v = bimagnon_second_moment(L, k)
    coups = np.asarray(exchange_couplings, dtype=float)
    rates = np.asarray(exchange_rates, dtype=float)
    unitary = float(np.sum(np.abs(coups))) * np.sqrt(2.0 * v)
    dissipative = 0.5 * float(np.sum(rates)) * np.sqrt(2.0 * exchange_norm**2 * v + 6.0 * v**2)
    return op_norm * (unitary + dissipative)


@dataclass(frozen=True)
class ShortTimeReport:
    first_numeric: float
    second_numeric: float
    first_analytic: float | None
    second_analytic: float | None
    observable_rate: float | None
    observable_bound: float | None


def short_time_derivatives(
    model: LindbladModel,
    psi: np.ndarray,
    aqmbs_k: float | None = None,
    observable: SparseOperator | None = None,
    sector="auto",
) -> ShortTimeReport:
    """Exact trace derivatives of the fidelity at t=0 plus the analytic closed forms.

    The analytic entries are filled only when ``aqmbs_k`` identifies the state
    as a momentum-k bimagnon on top of the tower; they are the exact
    finite-size expressions (second moment ``(4/L) cos^2(k/2)`` per bond).
    """
    rho0 = density_matrix(psi)
    indices = _resolve_sector(model, rho0, sector)
    work = rho0 if indices is None else rho0[np.ix_(indices, indices)]
    lmat = _liouvillian_matrix(model, indices)
    v = work.reshape(-1)
    lv = lmat @ v
    d1 = float(np.real(np.vdot(v, lv)))
    d2 = float(np.real(np.vdot(v, lmat @ lv)))

    first_analytic = second_analytic = None
    obs_rate = obs_bound = None
    if aqmbs_k is not None:
        L = model.spec.L
        ex_rates = [g for lab, _, g in model.jumps() if lab.startswith("exch_")]
        ex_coups = [j for lab, j in model.couplings.items() if lab.startswith("exch_")]
        first_analytic = aqmbs_fidelity_first_derivative(L, aqmbs_k, ex_rates)
        if not ex_rates:
            second_analytic = aqmbs_fidelity_second_derivative(L, aqmbs_k, ex_coups)
        obs_bound = observable_rate_bound(L, aqmbs_k, ex_coups, ex_rates)
    if observable is not None:
        omat = observable.matrix if indices is None else sp.csr_matrix(
            observable.matrix[np.ix_(indices, indices)]
        )
        obs_rate = float(abs(np.vdot(vec(omat.toarray()), lv)))

    return ShortTimeReport(
        first_numeric=d1,
        second_numeric=d2,
        first_analytic=first_analytic,
        second_analytic=second_analytic,
        observable_rate=obs_rate,
        observable_bound=obs_bound,
    )


# ---------------------------------------------------------------------------
# scaling collapse

def collapse_discrepancy(
    scaled_grids: list[np.ndarray],
    fidelities: list[np.ndarray],
    f_min: float = 0.8,
    n_common: int = 200,
) -> float:
    """Max pairwise fidelity spread over the common F >= f_min scaling window."""
    cutoffs = []
    for x, f in zip(scaled_grids, fidelities):
        above = f >= f_min
        if not above[0]:
            raise ValueError("curve starts below the fidelity window")
        drops = np.nonzero(~above)[0]
        cutoffs.append(x[drops[0] - 1] if len(drops) else x[-1])
    x_max = min(cutoffs)
    grid = np.linspace(0.0, x_max, n_common)
    interp = np.array([np.interp(grid, x, f) for x, f in zip(scaled_grids, fidelities)])
    return float(np.max(interp.max(axis=0) - interp.min(axis=0)))
