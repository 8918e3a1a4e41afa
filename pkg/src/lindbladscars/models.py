"""Catalog of Lindbladian spin-chain models and their exceptional states.

Spin-1/2 benchmark chains with discrete or U(1) strong symmetries, the two
chains hosting isolated scar stationary states, and the spin-1 chain hosting
a tower of scars built from momentum-pi bimagnons.  Each catalog entry fixes
a bond algebra (Hamiltonian term families plus hermitian jump operators),
default couplings and rates, and the sites/bonds ranges for either boundary
condition.

Couplings are stored per generator label, so the Hamiltonian is always
``H = sum_alpha J_alpha h_alpha`` with the sign conventions of the catalog
baked into the stored values (e.g. the three-site chain uses ``-J`` on its
exchange bonds).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
import scipy.sparse as sp

from .commutant import ROLE_HAMILTONIAN, ROLE_JUMP, BondAlgebra
from .operators import (
    HilbertSpec,
    SparseOperator,
    embed,
    local_operator,
    site_operator,
    total_sz,
)


@dataclass(frozen=True)
class LindbladModel:
    """Concrete Lindbladian: bond algebra plus couplings J_alpha and rates gamma_j."""

    model_id: str
    algebra: BondAlgebra
    couplings: dict[str, float] = field(repr=False)
    rates: dict[str, float] = field(repr=False)
    params: dict[str, float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        ham = set(self.algebra.labels(ROLE_HAMILTONIAN))
        jmp = set(self.algebra.labels(ROLE_JUMP))
        if set(self.couplings) != ham:
            raise ValueError("coupling keys do not match hamiltonian-role generators")
        if set(self.rates) != jmp:
            raise ValueError("rate keys do not match jump-role generators")
        if any(g < 0 for g in self.rates.values()):
            raise ValueError("rates must be nonnegative")

    @property
    def spec(self) -> HilbertSpec:
        return self.algebra.spec

    def hamiltonian(self) -> SparseOperator:
        total = sp.csr_matrix((self.spec.dim, self.spec.dim), dtype=complex)
        for label, coupling in self.couplings.items():
            total = total + coupling * self.algebra.operator(label).matrix
        return SparseOperator(self.spec, total)

    def jumps(self) -> list[tuple[str, SparseOperator, float]]:
        return [(lab, self.algebra.operator(lab), self.rates[lab]) for lab in self.rates]


# ---------------------------------------------------------------------------
# term builders

def exchange_term(spec: HilbertSpec, j: int) -> SparseOperator:
    """XX+YY exchange on bond (j, j+1); site j+1 may wrap when periodic."""
    x = local_operator("x", spec.local_dim)
    y = local_operator("y", spec.local_dim)
    return embed([(j, x), (j + 1, x)], spec) + embed([(j, y), (j + 1, y)], spec)


def diagonal_pair_term(spec: HilbertSpec, j: int) -> SparseOperator:
    """(S_j^z + S_{j+1}^z)(1 - S_j^z S_{j+1}^z) on a spin-1 bond."""
    z = local_operator("z", 3)
    ident = np.eye(3, dtype=complex)
    zs = embed([(j, z)], spec) + embed([(j + 1, z)], spec)
    zz = embed([(j, z), (j + 1, z)], spec)
    one = embed([(j, ident)], spec)
    return zs @ (one - zz)


def three_site_pump_term(spec: HilbertSpec, j: int) -> SparseOperator:
    """sigma_j^+ sigma_{j+1}^+ sigma_{j+2}^- + h.c. (breaks U(1), kills both ferromagnets)."""
    p = local_operator("+", 2)
    m = local_operator("-", 2)
    term = embed([(j, p), (j + 1, p), (j + 2, m)], spec)
    return term + term.dag()


def polarized_hop_terms(spec: HilbertSpec, j: int) -> tuple[SparseOperator, SparseOperator]:
    """sigma_j^x (1 - sigma_{j+1}^z) and (1 - sigma_j^z) sigma_{j+1}^x on bond j."""
    x = local_operator("x", 2)
    one_minus_z = np.eye(2, dtype=complex) - local_operator("z", 2)
    left = embed([(j, x), (j + 1, one_minus_z)], spec)
    right = embed([(j, one_minus_z), (j + 1, x)], spec)
    return left, right


# ---------------------------------------------------------------------------
# catalog

MODEL_DEFAULTS: dict[str, dict[str, float]] = {
    "full": {"J": 1.0, "hx": 1.0, "gamma": 1.0},
    "z2": {"J": 1.0, "gamma": 1.0},
    "double-z2": {"J": 1.0, "gamma": 1.0},
    "u1": {"J": 1.0, "gamma": 1.0},
    "isolated-1": {"J": 0.5, "D": 1.2, "gamma": 1.0},
    "isolated-2": {"J": 0.5, "D": 1.2, "gamma": 1.0},
    "tower-1": {"J": 2.0, "D": 0.2, "h": 0.3, "gamma": 1.0},
    "tower-2": {"D": 0.2, "D2": 0.8, "h": 1.0, "gamma": 4.0},
}

MODEL_MIN_L: dict[str, int] = {
    "full": 2, "z2": 2, "double-z2": 2, "u1": 2,
    "isolated-1": 2, "isolated-2": 3, "tower-1": 2, "tower-2": 2,
}


def catalog_ids() -> list[str]:
    return list(MODEL_DEFAULTS)


def expected_commutant_dimension(model_id: str, L: int) -> int:
    """Theoretical commutant dimension of each catalog bond algebra."""
    if model_id == "full":
        return 1
    if model_id == "z2":
        return 2
    if model_id == "double-z2":
        if L % 2:
            raise ValueError("double-z2 count is stated for even L only")
        return 4
    if model_id == "u1":
        return L + 1
    if model_id == "isolated-1":
        return 2
    if model_id == "isolated-2":
        return 3
    if model_id in ("tower-1", "tower-2"):
        # L+1 scar projectors, L-1 in-sector thermal complements, L scar-free sectors
        return 3 * L
    raise KeyError(model_id)


def build_model(
    model_id: str,
    L: int,
    boundary: str = "open",
    params: dict[str, float] | None = None,
) -> LindbladModel:
    """Instantiate a catalog model at size L with the given parameter overrides."""
    if model_id not in MODEL_DEFAULTS:
        raise KeyError(f"unknown model id {model_id!r}; catalog: {catalog_ids()}")
    if L < MODEL_MIN_L[model_id]:
        raise ValueError(f"model {model_id!r} needs L >= {MODEL_MIN_L[model_id]}")
    merged = dict(MODEL_DEFAULTS[model_id])
    for key, value in (params or {}).items():
        if key not in merged:
            raise ValueError(f"unknown parameter {key!r} for model {model_id!r}")
        merged[key] = float(value)

    local_dim = 3 if model_id.startswith("tower") else 2
    spec = HilbertSpec(L=L, local_dim=local_dim, boundary=boundary)
    bonds = spec.bonds()
    sites = range(1, L + 1)

    gens: list[tuple[str, SparseOperator, str]] = []
    couplings: dict[str, float] = {}
    rates: dict[str, float] = {}

    def add_ham(label, op, value):
        gens.append((label, op, ROLE_HAMILTONIAN))
        couplings[label] = value

    def add_jump(label, op, value):
        gens.append((label, op, ROLE_JUMP))
        rates[label] = value

    if model_id == "full":
        for j, _ in bonds:
            add_ham(f"xx_{j}", _xx_term(spec, j), merged["J"])
        for j in sites:
            add_ham(f"x_{j}", site_operator(spec, "x", j), merged["hx"])
        for j in sites:
            add_jump(f"z_{j}", site_operator(spec, "z", j), merged["gamma"])

    elif model_id == "z2":
        for j, _ in bonds:
            add_ham(f"xx_{j}", _xx_term(spec, j), merged["J"])
        for j in sites:
            add_jump(f"z_{j}", site_operator(spec, "z", j), merged["gamma"])

    elif model_id == "double-z2":
        for j, _ in bonds:
            add_ham(f"xx_{j}", _xx_term(spec, j), merged["J"])
        for j, _ in bonds:
            zz = embed([(j, local_operator("z", 2)), (j + 1, local_operator("z", 2))], spec)
            add_jump(f"zz_{j}", zz, merged["gamma"])

    elif model_id == "u1":
        for j, _ in bonds:
            add_ham(f"exch_{j}", exchange_term(spec, j), merged["J"])
        for j in sites:
            add_jump(f"z_{j}", site_operator(spec, "z", j), merged["gamma"])

    elif model_id == "isolated-1":
        for j, _ in bonds:
            add_ham(f"exch_{j}", exchange_term(spec, j), merged["J"])
        for j, _ in bonds:
            left, right = polarized_hop_terms(spec, j)
            add_ham(f"xl_{j}", left, merged["D"])
            add_ham(f"xr_{j}", right, merged["D"])
        for j in sites:
            add_jump(f"z_{j}", site_operator(spec, "z", j), merged["gamma"])

    elif model_id == "isolated-2":
        for j, _ in bonds:
            add_ham(f"exch_{j}", exchange_term(spec, j), -merged["J"])
        last = L if spec.periodic else L - 2
        for j in range(1, last + 1):
            add_ham(f"trip_{j}", three_site_pump_term(spec, j), merged["D"])
        for j in sites:
            add_jump(f"z_{j}", site_operator(spec, "z", j), merged["gamma"])

    elif model_id == "tower-1":
        for j, _ in bonds:
            add_ham(f"exch_{j}", exchange_term(spec, j), merged["J"])
        for j, _ in bonds:
            add_ham(f"dpair_{j}", diagonal_pair_term(spec, j), merged["D"])
        add_ham("field", total_sz(spec), -merged["h"])
        for j in sites:
            add_jump(f"zsq_{j}", site_operator(spec, "z2", j), merged["gamma"])

    elif model_id == "tower-2":
        for j in sites:
            add_ham(f"zsq_{j}", site_operator(spec, "z2", j), merged["D2"])
        for j, _ in bonds:
            add_ham(f"dpair_{j}", diagonal_pair_term(spec, j), merged["D"])
        add_ham("field", total_sz(spec), -merged["h"])
        for j, _ in bonds:
            add_jump(f"exch_{j}", exchange_term(spec, j), merged["gamma"])

    algebra = BondAlgebra(spec=spec, generators=tuple(gens))
    return LindbladModel(
        model_id=model_id, algebra=algebra, couplings=couplings, rates=rates, params=merged
    )


def _xx_term(spec: HilbertSpec, j: int) -> SparseOperator:
    x = local_operator("x", spec.local_dim)
    return embed([(j, x), (j + 1, x)], spec)


# ---------------------------------------------------------------------------
# states

@dataclass(frozen=True)
class ScarStateSpec:
    """Request for a catalog state: ferromagnets, tower(n), or aqmbs(n, k)."""

    kind: str
    spec: HilbertSpec
    n: int | None = None
    k: float | None = None


def product_state(spec: HilbertSpec, pattern: str) -> np.ndarray:
    """Basis product state from a pattern string: 'u'/'d' (spin-1/2), '+','0','-' (spin-1)."""
    symbols = {2: {"u": 0, "d": 1}, 3: {"+": 0, "0": 1, "-": 2}}[spec.local_dim]
    if len(pattern) != spec.L:
        raise ValueError(f"pattern length {len(pattern)} != L = {spec.L}")
    index = 0
    for ch in pattern:
        if ch not in symbols:
            raise ValueError(f"symbol {ch!r} invalid for local_dim={spec.local_dim}")
        index = index * spec.local_dim + symbols[ch]
    out = np.zeros(spec.dim, dtype=complex)
    out[index] = 1.0
    return out


def bimagnon_ladder(spec: HilbertSpec, k: float) -> sp.csr_matrix:
    """Momentum-k bimagnon creation (1/2) sum_j e^{ikj} (S_j^+)^2, 1-based phases."""
    if spec.local_dim != 3:
        raise ValueError("bimagnon operators need a spin-1 chain")
    plus = local_operator("+", 3)
    local = plus @ plus / 2.0
    total = sp.csr_matrix((spec.dim, spec.dim), dtype=complex)
    for j in range(1, spec.L + 1):
        total = total + np.exp(1j * k * j) * embed([(j, local)], spec).matrix
    return total


def default_aqmbs_momentum(L: int) -> float:
    return np.pi + 2.0 * np.pi / L


def _validate_momentum(L: int, k: float):
    steps = (k - np.pi) * L / (2.0 * np.pi)
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError(f"momentum {k} is not of the form pi + 2*pi*m/L")


def scar_state(state_spec: ScarStateSpec) -> np.ndarray:
    """Normalized catalog state vector."""
    spec = state_spec.spec
    kind = state_spec.kind
    if kind == "ferromagnet-up":
        out = np.zeros(spec.dim, dtype=complex)
        out[0] = 1.0
        return out
    if kind == "ferromagnet-down":
        out = np.zeros(spec.dim, dtype=complex)
        out[-1] = 1.0
        return out
    if kind == "tower":
        n = state_spec.n
        if spec.local_dim != 3:
            raise ValueError("tower states live on spin-1 chains")
        if n is None or not 0 <= n <= spec.L:
            raise ValueError(f"tower index must satisfy 0 <= n <= L, got {n}")
        ladder = bimagnon_ladder(spec, np.pi)
        vecstate = np.zeros(spec.dim, dtype=complex)
        vecstate[-1] = 1.0  # all sites in |->
        for _ in range(n):
            vecstate = ladder @ vecstate
        return vecstate / np.linalg.norm(vecstate)
    if kind == "aqmbs":
        n, k = state_spec.n, state_spec.k
        if spec.local_dim != 3:
            raise ValueError("bimagnon states live on spin-1 chains")
        if n is None or not 1 <= n <= spec.L:
            raise ValueError(f"bimagnon count must satisfy 1 <= n <= L, got {n}")
        if k is None:
            k = default_aqmbs_momentum(spec.L)
        _validate_momentum(spec.L, k)
        base = scar_state(ScarStateSpec(kind="tower", spec=spec, n=n - 1))
        vecstate = bimagnon_ladder(spec, k) @ base
        norm = np.linalg.norm(vecstate)
        if norm**2 < 1e-12:
            raise ValueError(f"state (n={n}, k={k}) has vanishing normalization")
        return vecstate / norm
    raise ValueError(f"unknown state kind {kind!r}")


def tower_state(spec: HilbertSpec, n: int) -> np.ndarray:
    return scar_state(ScarStateSpec(kind="tower", spec=spec, n=n))


def aqmbs_state(spec: HilbertSpec, n: int, k: float | None = None) -> np.ndarray:
    return scar_state(ScarStateSpec(kind="aqmbs", spec=spec, n=n, k=k))


def scar_aqmbs_superposition(spec: HilbertSpec, n: int, k: float | None = None) -> np.ndarray:
    """Equal superposition of tower(n) and the (n, k) bimagnon state."""
    return (tower_state(spec, n) + aqmbs_state(spec, n, k)) / np.sqrt(2.0)


def tower_prefactor(L: int, n: int) -> float:
    """Closed-form normalization 1 / (n! sqrt(binom(L, n))) of the raw tower state."""
    return 1.0 / (factorial(n) * np.sqrt(comb(L, n)))


def singlet_check(algebra: BondAlgebra, state: np.ndarray, tol: float = 1e-10) -> dict[str, float | None]:
    """Per-generator eigenvalue of a simultaneous-eigenstate candidate, or None on failure."""
    state = np.asarray(state, dtype=complex)
    if abs(np.linalg.norm(state) - 1.0) > 1e-10:
        raise ValueError("state must be normalized")
    report: dict[str, float | None] = {}
    for label, op, _ in algebra.generators:
        image = op.matrix @ state
        eig = np.vdot(state, image)
        if np.linalg.norm(image - eig * state) < tol:
            report[label] = float(eig.real)
        else:
            report[label] = None
    return report


def is_singlet(algebra: BondAlgebra, state: np.ndarray, tol: float = 1e-10) -> bool:
    return all(v is not None for v in singlet_check(algebra, state, tol).values())


# ---------------------------------------------------------------------------
# figure initial states

def fig1_initial_patterns(L: int) -> list[str]:
    """Product states orthogonal to both ferromagnets: Neel, up-up-down-down, single flip."""
    neel = ("ud" * L)[:L]
    pairs = ("uudd" * L)[:L]
    flip = "d" + "u" * (L - 1)
    return [neel, pairs, flip]


def fig2_initial_pattern(L: int) -> str:
    """Zero-magnetization spin-1 product state containing a local |0> (never a tower state)."""
    if L % 2:
        return "0" + "+-" * (L // 2)
    return "00" + "+-" * ((L - 2) // 2)


def zero_sector_dimension(L: int) -> int:
    """Spin-1 zero-magnetization sector size, sum_k binom(L, 2k) binom(2k, k)."""
    return sum(comb(L, 2 * kk) * comb(2 * kk, kk) for kk in range(L // 2 + 1))
