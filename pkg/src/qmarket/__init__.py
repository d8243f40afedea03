"""Toy stock market built from bosonic number operators.

``fpl`` integrates the fixed-point-like approximation of the trader
dynamics, ``schedules`` supplies price profiles, ``scenarios`` runs the
case/subcase grid and ``fock`` is an exact truncated Fock-space oracle
for the operator identities the approximation relies on.
"""

from .fpl import (
    Expectations,
    InitialState,
    ModelParams,
    Trajectory,
    cumulative_integral,
    omega12_closed_form,
    solve,
    solve_closed,
    time_grid,
)
from .scenarios import Numerics, ScenarioId, calibrate_lambda, run_grid, run_scenario
from .schedules import builtin_schedule, closed_schedule, custom_schedule

__version__ = "0.1.0"
