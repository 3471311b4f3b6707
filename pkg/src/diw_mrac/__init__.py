"""Model reference adaptive control of a reduced-order direct-ink-writing extruder."""
from .config import ConfigError, SimulationConfig, config_from_dict, parse_scenario, parse_sweep
from .model import BetaSet, ControlInput, GammaBarSet, PlantState, UncertaintyPair
from .mrac import ControllerConfig, validate_gains
from .sim import Trajectory, run_closed_loop, run_pair_comparison

__version__ = "0.1.0"

__all__ = [
    "BetaSet", "ConfigError", "ControlInput", "ControllerConfig", "GammaBarSet", "PlantState",
    "SimulationConfig", "Trajectory", "UncertaintyPair", "config_from_dict", "parse_scenario",
    "parse_sweep", "run_closed_loop", "run_pair_comparison", "validate_gains",
]
