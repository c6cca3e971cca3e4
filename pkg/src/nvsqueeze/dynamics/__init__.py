"""Model Hamiltonians and propagation (closed form and master equation)."""

from .gaussian import evolve_exact, jx_eigenbasis, log_coherence, spin_state_at
from .hamiltonians import (
    alpha_of_t,
    build_H_dicke,
    build_H_HP,
    magnus_propagator,
    theta_of_t,
    twisting_state,
)
from .lindblad import (
    EvolutionResult,
    LindbladRHS,
    choose_phonon_dim,
    dopri5,
    evolve_lindblad,
    initial_state,
    lindblad_rhs,
)
from .params import ModelParams, coupling_for_phase

__all__ = [
    "EvolutionResult",
    "LindbladRHS",
    "ModelParams",
    "alpha_of_t",
    "build_H_HP",
    "build_H_dicke",
    "choose_phonon_dim",
    "coupling_for_phase",
    "dopri5",
    "evolve_exact",
    "evolve_lindblad",
    "initial_state",
    "jx_eigenbasis",
    "lindblad_rhs",
    "log_coherence",
    "magnus_propagator",
    "spin_state_at",
    "theta_of_t",
    "twisting_state",
]
