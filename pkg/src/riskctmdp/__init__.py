"""Exponential-utility control of finite gradual-impulse CTMDPs.

Reduce the continuous-time model to a discrete-time one
(:func:`build_tilde`), solve it by value iteration (:func:`value_iterate`),
read off an optimal stationary policy (:func:`extract_policy`) and check
it against brute force (:func:`brute_force_value`) or Monte Carlo
(:func:`estimate_utility`).
"""

from .model import (
    CtmdpModel,
    InvalidModelError,
    ModelStructureError,
    Violation,
    default_bounding_function,
    rat_example,
    validate_model,
    zero_cost_model,
)
from .oracle import brute_force_value, enumerate_policies, linear_policy_value, random_model
from .simulator import estimate_utility, simulate_path, suggest_horizon, utility_second_moment
from .solver import (
    Gradual,
    Impulse,
    ResidualReport,
    StationaryPolicy,
    ValueSolution,
    bellman_apply,
    evaluate_policy,
    extract_policy,
    value_iterate,
    verify_optimality,
)
from .tilde import TildeModel, build_tilde, row_weight_sum

__version__ = "0.1.0"
