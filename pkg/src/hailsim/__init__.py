"""Deterministic multi-agent Q-learning simulator of street-hail and app-hail taxis."""

from hailsim.engine import Simulation, run, simulate
from hailsim.gridworld import ConfigurationError
from hailsim.scenarios import BUILTINS, ScenarioConfig, builtin, load_config, parse_config

__all__ = [
    "BUILTINS",
    "ConfigurationError",
    "ScenarioConfig",
    "Simulation",
    "builtin",
    "load_config",
    "parse_config",
    "run",
    "simulate",
]
