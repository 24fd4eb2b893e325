"""Configuration, experiments, output and the command-line interface."""
from .config import ExperimentSpec, format_config, parse_config, parse_text
from .experiments import run_energy_budget, run_vanish, run_weak_strong, strong_reference

__all__ = ["ExperimentSpec", "parse_config", "parse_text", "format_config",
           "run_energy_budget", "run_weak_strong", "run_vanish", "strong_reference"]
