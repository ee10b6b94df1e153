"""Stochastic optimal control of a standalone solar microgrid.

A small library and CLI for scheduling a battery and a finite-fuel backup
generator against seasonal, mean-reverting residual demand: exact one-step
Gaussian transition laws, a chance-constrained feasible action structure,
discretization to a finite Markov chain, finite-horizon backward recursion,
and scenario path simulation.
"""

__version__ = "0.1.0"

from .config import (Action, BatteryParams, ConfigError, CostParams,
                     DiscretizationParams, GeneratorParams, ModelConfig,
                     SeasonalOUParams, State, config_hash, default_config,
                     dump_config, load_config, seasonality, validate_config)
from .constraints import FeasibleSet, feasible_actions
from .cost import (DiscountFactors, StageCost, discount_factors,
                   expected_stage_cost, running_cost, terminal_cost)
from .dynamics import (NoiseVector, TransitionMoments, cross_moments, efficiency,
                       g_moments, q_moments, transition_moments,
                       transition_operator, z_moments)
from .grid import Axis, StateGrid, build_grid, cell_of, neighborhood
from .kernel import (NumericalError, TransitionKernel, TransitionRow,
                     bvn_rect_prob, transition_row)
from .simulate import (SCENARIOS, PathRecord, Scenario, baseline_wait_policy,
                       euler_oracle, sample_transition, simulate_path)
from .solver import (PolicyTable, ValueTable, bellman_backup, feasibility_mask,
                     solve, step_q_values, terminal_values, worker_count)

__all__ = [
    "Action", "Axis", "BatteryParams", "ConfigError", "CostParams",
    "DiscountFactors", "DiscretizationParams", "FeasibleSet", "GeneratorParams",
    "ModelConfig", "NoiseVector", "NumericalError", "PathRecord", "PolicyTable",
    "SCENARIOS", "Scenario", "SeasonalOUParams", "StageCost", "State",
    "StateGrid", "TransitionKernel", "TransitionMoments", "TransitionRow",
    "ValueTable", "baseline_wait_policy", "bellman_backup", "build_grid",
    "bvn_rect_prob", "cell_of", "config_hash", "cross_moments",
    "default_config", "discount_factors", "dump_config", "efficiency",
    "euler_oracle", "expected_stage_cost", "feasibility_mask",
    "feasible_actions", "g_moments", "load_config", "neighborhood", "q_moments",
    "running_cost", "sample_transition", "seasonality", "simulate_path",
    "solve", "step_q_values", "terminal_cost", "terminal_values",
    "transition_moments", "transition_operator", "transition_row",
    "validate_config", "worker_count", "z_moments",
]
