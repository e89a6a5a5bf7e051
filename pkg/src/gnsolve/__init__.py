"""Finite-volume prediction-correction solver for the Green-Naghdi equations in 1D."""

from .analytic import SolitonParams, lake_at_rest, solitary_wave
from .boundary import BoundarySpec, discharge_pressure, fixed_depth_velocity, periodic, transparent, wall
from .correction import solve_correction
from .driver import RunConfig, convergence_study, l2_error, run_simulation, transparent_exit_check
from .mesh import Grid, build_uniform_grid
from .state import Bathymetry, PressureField, State

__version__ = "0.1.0"
