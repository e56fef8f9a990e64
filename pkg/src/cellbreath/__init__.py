"""Opportunistic scheduling for two cooperating cells with near/far user groups.

Users see Gilbert-Elliott channels observed only through ARQ feedback.  The
package provides the channel/belief model, the physical-layer capture model,
greedy-family schedulers under cell breathing, an exact DP oracle, a Whittle
index for near-far user pairs and a Monte Carlo simulator.
"""

from .exceptions import BudgetExceededError, CellBreathingViolation, ConfigError, InvariantViolation
from .markov_channel import TransitionMatrix, belief_update, stationary_belief, t_operator, t_power

__version__ = "0.1.0"

__all__ = ["BudgetExceededError", "CellBreathingViolation", "ConfigError", "InvariantViolation",
           "TransitionMatrix", "belief_update", "stationary_belief", "t_operator", "t_power"]
