"""Simulation and structural estimation of learning from others' choices.

Subjects guess which of two urns was drawn, either from a ball they see
themselves or from the guess of another participant. Choices and stated
beliefs are generated by a biased-updating + logistic-choice model and the
toolkit classifies errors, tests differences and recovers the parameters.
"""

__version__ = "0.1.0"

from .env import (  # noqa: E402
    InformationStructure,
    Signal,
    State,
    bayes_posterior,
    canonicalize,
    enumerate_structures,
    likelihood,
    rational_choice,
)
from .agents import (  # noqa: E402
    AgentParams,
    grether_posterior,
    logit_choice_prob,
    social_posterior,
    social_signal_likelihoods,
)
from .panel import Condition, Panel, TrialRecord, Treatment  # noqa: E402
from .sim import Population, SimConfig, simulate_experiment, simulate_pool  # noqa: E402

__all__ = [
    "AgentParams",
    "Condition",
    "InformationStructure",
    "Panel",
    "Population",
    "Signal",
    "SimConfig",
    "State",
    "TrialRecord",
    "Treatment",
    "bayes_posterior",
    "canonicalize",
    "enumerate_structures",
    "grether_posterior",
    "likelihood",
    "logit_choice_prob",
    "rational_choice",
    "simulate_experiment",
    "simulate_pool",
    "social_posterior",
    "social_signal_likelihoods",
]
