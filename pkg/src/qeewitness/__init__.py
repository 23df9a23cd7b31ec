"""Direct detection of qubit-environment entanglement under pure dephasing."""

__version__ = "0.1.0"

from .constants import HBAR, K_B, TOL, Tolerances
from .dephasing_model import (
    PureDephasingModel,
    commuting_blind_spot_check,
    conditional_env_states,
    conditional_propagators,
    separability_check,
)
from .operator_core import NumericalError, ValidationError, negativity
from .oracle import ModelRecipe, SoundnessViolation, certify_witness, generate_model
from .phonon_bath import PhononBathParams, phonon_witness, sweep_tau
from .protocol import WitnessTrace, witness

__all__ = [
    "HBAR", "K_B", "TOL", "Tolerances", "PureDephasingModel", "commuting_blind_spot_check",
    "conditional_env_states", "conditional_propagators", "separability_check", "NumericalError",
    "ValidationError", "negativity", "ModelRecipe", "SoundnessViolation", "certify_witness",
    "generate_model", "PhononBathParams", "phonon_witness", "sweep_tau", "WitnessTrace", "witness",
]
