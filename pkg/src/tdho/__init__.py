"""Particle in a time-dependent harmonic well at three levels: classical
trajectories, Gaussian wave-packet parameters, and the full Schrödinger
wave-function."""

from .classical import (
    FundamentalPair,
    fundamental_pair,
    integrate_oscillator,
    poisson_bracket_fd,
    wronskian_charges,
)
from .core import (
    ClassicalState,
    CollapseError,
    Constant,
    DomainError,
    Floquet,
    IntegrationError,
    LinearRampOfOmegaSq,
    PhysicalParams,
    Tabulated,
    TdhoError,
    TimeGrid,
    TimeRangeError,
    Trajectory,
    omega_sq,
    omega_sq_dot,
)
from .ermakov import (
    EtaSolution,
    ReparamMap,
    eta_from_pair,
    ermakov_invariant,
    frequency_transform_residual,
    invariant_from_wronskians,
    reparametrize_trajectory,
    schwarzian,
    solve_eta_ode,
    symmetry_residual,
    synchronizing_clock,
)
from .gaussian import (
    GaussianSeries,
    GaussianState,
    Moments,
    alpha_clock,
    casimir_ermakov_identity,
    effective_hamiltonian,
    evolve_gaussian,
    moments_of_gaussian,
    uncertainty_algebra_check,
    uncertainty_casimir,
)
from .schrodinger import (
    SpatialGrid,
    WaveFunction,
    compare_effective_vs_pde,
    init_gaussian_wavefunction,
    moments,
    split_step_propagate,
)

__version__ = "0.1.0"
