"""
Greedy is a round robin
=======================

With positively correlated channels the greedy choice needs no beliefs:
keep serving a user while it ACKs, and on a NACK move it to the back of the
queue.
"""

from cellbreath.dp_oracle import sufficient_condition_check
from cellbreath.markov_channel import TransitionMatrix
from cellbreath.phy_layer import FAR, NEAR
from cellbreath.scheduler_core import BreathingPattern, greedy_equals_round_robin_check
from cellbreath.simulator import EpisodeConfig, group_steps, run_episode

cfg = EpisodeConfig(TransitionMatrix(0.8, 0.2), 3, 3, horizon=30, seed=5, policy="fixed-pattern",
                    pattern=BreathingPattern.parse("1F,1F,1N"))
trace = run_episode(cfg, 0)
for cell in (1, 2):
    for group in (NEAR, FAR):
        steps = group_steps(trace, cell, group)
        picks = "".join(str(s.scheduled) for s in steps)
        print(f"cell {cell} {group:>4}: picks {picks:<20} round robin: "
              f"{greedy_equals_round_robin_check(steps)}")

# The optimality of that round robin rests on an inequality over channel
# realizations; its left-hand side must stay at or below 1.
for p, r in ((0.6, 0.5), (0.8, 0.2), (0.95, 0.05)):
    lhs = sufficient_condition_check(TransitionMatrix(p, r), 3, 5)
    print(f"p={p}, r={r}: max lhs = {lhs:.4f}")
