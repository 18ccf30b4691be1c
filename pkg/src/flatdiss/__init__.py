"""Open-system dynamics of the Tasaki flat-band chain under two-site dissipation."""

__version__ = "0.1.0"

from .dissipators import JumpChannel, JumpSet, build_dephasing, build_dephasing_set, build_jump, build_jump_set
from .errors import (
    ConfigError,
    DegenerateSteadyState,
    EigensolverError,
    FlatDissError,
    IntegrationError,
    InvariantViolation,
    NoZeroEigenvalue,
    SingularSystem,
    SolverError,
    SpectralGapError,
)
from .lattice import LatticeSpec, Spectrum, build_tasaki, classify_states, dispersion, eigendecompose, ipr
from .observables import eigenbasis_matrix, fidelity, in_phase_ratio, localized_fraction, phase_profile
from .solvers import evolve, spectral_gap, steady_state, steady_state_dense, steady_state_linear
from .superop import Superoperator, apply_liouvillian, assemble_liouvillian, read_coo, unvec, vec, write_coo

__all__ = [
    "ConfigError",
    "DegenerateSteadyState",
    "EigensolverError",
    "FlatDissError",
    "IntegrationError",
    "InvariantViolation",
    "JumpChannel",
    "JumpSet",
    "LatticeSpec",
    "NoZeroEigenvalue",
    "SingularSystem",
    "SolverError",
    "SpectralGapError",
    "Spectrum",
    "Superoperator",
    "apply_liouvillian",
    "assemble_liouvillian",
    "build_dephasing",
    "build_dephasing_set",
    "build_jump",
    "build_jump_set",
    "build_tasaki",
    "classify_states",
    "dispersion",
    "eigenbasis_matrix",
    "eigendecompose",
    "evolve",
    "fidelity",
    "in_phase_ratio",
    "ipr",
    "localized_fraction",
    "phase_profile",
    "read_coo",
    "spectral_gap",
    "steady_state",
    "steady_state_dense",
    "steady_state_linear",
    "unvec",
    "vec",
    "write_coo",
]
