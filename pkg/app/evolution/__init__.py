"""Time integration and trajectory property checks."""
from app.evolution.checks import (
    check_comparison,
    check_continuous_dependence,
    check_directional_monotonicity,
    check_equivariance,
    check_linear_bound,
    check_positivity,
    check_semigroup,
    check_step_refinement,
    check_time_regularity,
    check_tube,
    ordered_pairs,
)
from app.evolution.schedule import StepSchedule, schedule_cap
from app.evolution.stepper import EvolveOptions, Trajectory, evolve, linear_upper_bound, step

__all__ = [
    "EvolveOptions",
    "StepSchedule",
    "Trajectory",
    "check_comparison",
    "check_continuous_dependence",
    "check_directional_monotonicity",
    "check_equivariance",
    "check_linear_bound",
    "check_positivity",
    "check_semigroup",
    "check_step_refinement",
    "check_time_regularity",
    "check_tube",
    "evolve",
    "linear_upper_bound",
    "ordered_pairs",
    "schedule_cap",
    "step",
]
