"""Threshold (one-sided) solutions of discounted optimal stopping problems.

Rewards g are increasing and logconcave; the state is a random walk or a
discretized Levy process.  The main entry points are :func:`solve` for walks,
:func:`threshold_sequence` for Levy models and :func:`analyze_smooth_fit`.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .classify import light_tail_characterization, novikov_shiryaev, sufficient_finite, sufficient_infinite
from .errors import OneSidedError
from .levy import LevyModel, continuous_threshold, continuous_value, regularity_of_zero, threshold_sequence
from .oracle import check_one_sided, cross_validate, value_iteration
from .reward import (ExpCall, ExpLinear, ExpPut, Indicator, LogisticExponential, PiecewiseLogLinear, PowerPlus,
                     RewardFunction, Scaled, TaperedExponential, Truncated, reward_from_dict)
from .smoothfit import analyze as analyze_smooth_fit
from .smoothfit import check_criterion_a1, left_derivative_of_value, overshoot_derivative_formula
from .solver import ThresholdSolution, find_threshold, never_stop_value, solve
from .stochastic import JumpDistribution, LatticeLaw, SamplerLaw, first_passage_exact, first_passage_mc, mgf_root

__all__ = [
    "BACKEND", "ExpCall", "ExpLinear", "ExpPut", "Indicator", "JumpDistribution", "LatticeLaw", "LevyModel",
    "LogisticExponential", "OneSidedError", "PiecewiseLogLinear", "PowerPlus", "RewardFunction", "SamplerLaw",
    "Scaled", "TaperedExponential", "ThresholdSolution", "Truncated", "analyze_smooth_fit", "check_criterion_a1",
    "check_one_sided", "continuous_threshold", "continuous_value", "cross_validate", "find_threshold",
    "first_passage_exact", "first_passage_mc", "left_derivative_of_value", "light_tail_characterization",
    "mgf_root", "never_stop_value", "novikov_shiryaev", "overshoot_derivative_formula", "regularity_of_zero",
    "reward_from_dict", "solve", "sufficient_finite", "sufficient_infinite", "threshold_sequence",
    "value_iteration",
]
