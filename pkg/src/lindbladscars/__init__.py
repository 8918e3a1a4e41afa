"""Bond/commutant algebras and scar dynamics of Lindbladian spin chains."""

__version__ = "0.1.0"

from .brownian import (
    BrownianSpec,
    averaged_autocorrelation,
    d_eff,
    from_model,
    sample_circuit_autocorrelation,
    stationary_autocorrelation,
)
from .commutant import (
    BondAlgebra,
    CommutantBasis,
    IrrepBlock,
    IrrepDecomposition,
    StrongSymmetry,
    commutant_basis,
    irrep_decomposition,
    mazur_bound,
    max_commutator_residual,
    reconstruction_residual,
    stationary_state,
    strong_symmetry,
    super_hamiltonian,
)
from .dynamics import (
    EffectivePair,
    EvolutionResult,
    coherence_norm_series,
    coherence_rate_check,
    collapse_discrepancy,
    density_matrix,
    effective_pair,
    evolve_exact,
    evolve_trajectories,
    fidelity_series,
    heisenberg_map_check,
    liouvillian,
    observable_series,
    plateau,
    short_time_derivatives,
)
from .errors import ConfigError, SolverError
from .models import (
    LindbladModel,
    ScarStateSpec,
    aqmbs_state,
    build_model,
    catalog_ids,
    expected_commutant_dimension,
    fig1_initial_patterns,
    fig2_initial_pattern,
    product_state,
    scar_aqmbs_superposition,
    scar_state,
    singlet_check,
    tower_state,
    zero_sector_dimension,
)
from .operators import (
    HilbertSpec,
    SectorPartition,
    SparseOperator,
    SparseSuperOperator,
    adjoint_superop,
    embed,
    local_operator,
    project_to_sector,
    sector_partition,
    site_operator,
    total_sz,
)
