"""Exact-diagonalization toolkit for long-range lattice boson dynamics.

Fock-space simulation of Bose-Hubbard-type Hamiltonians with power-law
couplings, plus checkers for ballistic particle-transport bounds,
moving-localization-observable schedules, and commutator decay scans.
"""

from .astlo import (
    AstloObservable,
    CutoffFunction,
    MultiscaleSchedule,
    astlo_operator,
    bad_time_monitor,
    holder_constant,
    make_cutoff,
    make_schedule,
    remainder_functional,
)
from .config import ConfigError, config_hash, load_config, validate_config
from .couplings import (
    HOPPING,
    INTERACTION,
    CouplingMatrix,
    decay_constant,
    kappa,
    kappa_nu,
    power_law_couplings,
)
from .dynamics import (
    KrylovConvergenceError,
    Propagator,
    Trajectory,
    evolve,
    heisenberg_expectation,
    localized_heisenberg,
    one_body_density_oracle,
    remainder_pairings,
)
from .fock import (
    DimensionCapError,
    FockBasis,
    QuantumState,
    SparseOperator,
    basis_vector,
    build_basis,
    diagonal_operator,
    diagonal_power,
    fixed_n_dimension,
    hamiltonian,
    hopping_operator,
    interaction_operator,
    interaction_operator_q,
    mott_state,
    number_operator,
    restrict_hamiltonian,
    shell_state,
    site_number_operator,
    truncated_dimension,
)
from .lattice import (
    EmptyRegionError,
    Lattice,
    Region,
    annulus,
    ball,
    centered_chain,
    chain,
    fatten,
    grid,
    origin_ball,
    region,
    region_distance,
)
from .probes import (
    BoundReport,
    annulus_mvb,
    beta_exponent,
    check_moment_bounds,
    check_operator_holder,
    density_window_check,
    lrb_scan,
    truncation_consistency,
)

__version__ = "0.1.0"
