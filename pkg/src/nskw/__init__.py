"""Pseudo-spectral simulation and entropy diagnostics for the compressible
Navier-Stokes-Korteweg system with non-Newtonian stress on the periodic
unit torus."""
from .constitutive import PressureLaw, StressModel
from .dynamics import InitialCondition, SimConfig, State, Trajectory, run, step
from .errors import BlowUpError, ConfigError, NonFiniteFieldError, StepRejected, VacuumError
from .fields import Grid, make_grid

__version__ = "0.1.0"

__all__ = [
    "Grid", "make_grid", "StressModel", "PressureLaw", "State", "SimConfig",
    "InitialCondition", "Trajectory", "run", "step", "ConfigError",
    "NonFiniteFieldError", "VacuumError", "StepRejected", "BlowUpError",
]
