"""Gittins indices for Markovian bandits: exact computation via the
retirement formulation, tabular and deep online learners, and a preemptive
job-scheduling application."""

from .core import (
    ArmModel,
    BanditInstance,
    ConstantRateSchedule,
    EpsilonSchedule,
    LearningRateSchedule,
    MixedRateSchedule,
    RandomSource,
    RateFunctions,
    alpha_at,
    beta_at,
    epsilon_greedy_select,
    step_arm,
    validate_two_timescale,
)
from .oracle import RetirementSolution, gittins_exact, reference_value_star, retirement_value

__all__ = [
    "ArmModel",
    "BanditInstance",
    "ConstantRateSchedule",
    "EpsilonSchedule",
    "LearningRateSchedule",
    "MixedRateSchedule",
    "RandomSource",
    "RateFunctions",
    "RetirementSolution",
    "alpha_at",
    "beta_at",
    "epsilon_greedy_select",
    "gittins_exact",
    "reference_value_star",
    "retirement_value",
    "step_arm",
    "validate_two_timescale",
]

__version__ = "0.1.0"
