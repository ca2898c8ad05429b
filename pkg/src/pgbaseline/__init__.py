"""Policy-gradient estimation with reward baselines.

GPOMDP and GARB gradient estimators, their online counterparts OLPOMDP and
OLGARB, exact oracles for small MDPs, benchmark environments and a
reproducible experiment runner.
"""

from .estimators import (GARB, GPOMDP, OLGARB, OLPOMDP, EstimatorConfig, EstimatorState,
                         constant_baseline_estimate, discounted_traces, garb_update,
                         gpomdp_update, olgarb_step, olpomdp_step, running_estimates)
from .mdp import (LinearSoftmaxPolicy, SoftmaxPolicy, TabularMdp, TabularSoftmaxPolicy,
                  Trajectory, TrajectoryStep, action_distribution, sample_trajectory, score)
from .oracle import (OptimalBaselineResult, OracleError, OracleResult, average_reward,
                     dayan_optimal_baseline, exact_gradient, optimal_constant_baseline,
                     relative_error, stationary_distribution)

__version__ = "0.1.0"

__all__ = [
    "GARB", "GPOMDP", "OLGARB", "OLPOMDP", "EstimatorConfig", "EstimatorState",
    "LinearSoftmaxPolicy", "OptimalBaselineResult", "OracleError", "OracleResult",
    "SoftmaxPolicy", "TabularMdp", "TabularSoftmaxPolicy", "Trajectory", "TrajectoryStep",
    "action_distribution", "average_reward", "constant_baseline_estimate",
    "dayan_optimal_baseline", "discounted_traces", "exact_gradient", "garb_update",
    "gpomdp_update", "olgarb_step", "olpomdp_step", "optimal_constant_baseline",
    "relative_error", "running_estimates", "sample_trajectory", "score",
    "stationary_distribution",
]
