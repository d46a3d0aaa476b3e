"""
Secure Consensus Lab

Observer-based, event-triggered secure consensus of linear multi-agent
systems under Bernoulli deception attacks and Markov switching topologies.
"""

from .core.config import settings
from .gain_synthesis import GainSet, synthesize_gains, verify_theorem_conditions
from .protocol_core import PlantModel, build_spacecraft_model
from .sim_harness import Scenario, monte_carlo, run_scenario

__version__ = settings.APP_VERSION

__all__ = [
    "GainSet",
    "PlantModel",
    "Scenario",
    "build_spacecraft_model",
    "monte_carlo",
    "run_scenario",
    "synthesize_gains",
    "verify_theorem_conditions",
]
