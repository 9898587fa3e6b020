"""mfmc: discrete-time Markov model of a microfluidic molecular communication channel."""

from .channel_config import (
    REFERENCE_CHANNEL,
    ChannelConfig,
    ElementaryProbabilities,
    elementary_probabilities,
    load_config,
    peclet_number,
    validate_config,
)
from .markov_kernel import (
    SpectralBracket,
    TransitionModel,
    build_transition_model,
    check_conservation,
    full_transition_matrix,
    spectral_bracket,
    spectral_radius_estimate,
)
from .state_space import (
    Cir,
    Trajectory,
    cir,
    continuous_response,
    equilibrium_gain,
    neumann_gain,
    propagate,
    pulse_response,
)
from .particle_oracle import ComparisonReport, PbsConfig, PbsResult, compare_to_model, run_pbs
from .scenario import Scenario, SweepSpec, load_scenario, load_sweep

__all__ = [
    "REFERENCE_CHANNEL",
    "ChannelConfig",
    "ElementaryProbabilities",
    "elementary_probabilities",
    "load_config",
    "peclet_number",
    "validate_config",
    "TransitionModel",
    "build_transition_model",
    "check_conservation",
    "full_transition_matrix",
    "SpectralBracket",
    "spectral_bracket",
    "spectral_radius_estimate",
    "Cir",
    "Trajectory",
    "cir",
    "continuous_response",
    "equilibrium_gain",
    "neumann_gain",
    "propagate",
    "pulse_response",
    "ComparisonReport",
    "PbsConfig",
    "PbsResult",
    "compare_to_model",
    "run_pbs",
    "Scenario",
    "SweepSpec",
    "load_scenario",
    "load_sweep",
]
