"""Spin squeezing and GHZ generation in an NV-spin ensemble coupled to a
nanomechanical resonator through a magnetic-field gradient."""

__version__ = "0.1.0"

from .dynamics import ModelParams, evolve_exact, evolve_lindblad, initial_state, magnus_propagator
from .observables import (
    ghz_fidelity,
    optimal_theta_formula,
    squeezing_kitagawa,
    squeezing_record,
    squeezing_wineland,
    to_dB,
)
from .opalg import HilbertSpec, OperatorSet, QState, operator_set

__all__ = [
    "HilbertSpec",
    "ModelParams",
    "OperatorSet",
    "QState",
    "evolve_exact",
    "evolve_lindblad",
    "ghz_fidelity",
    "initial_state",
    "magnus_propagator",
    "operator_set",
    "optimal_theta_formula",
    "squeezing_kitagawa",
    "squeezing_record",
    "squeezing_wineland",
    "to_dB",
]
