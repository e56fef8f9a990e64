"""
Greedy against the exact optimum
================================

For small systems the dynamic program over ARQ outcomes is tractable, which
gives an exact yardstick for the greedy-family policies.
"""

from cellbreath.dp_oracle import decoupled_value, evaluate_policy, solve_optimal
from cellbreath.markov_channel import TransitionMatrix
from cellbreath.scheduler_core import (
    BreathingPattern,
    SystemBeliefState,
    asymmetric_policy_step,
    fixed_pattern_policy_step,
    joint_greedy_step,
)

chain = TransitionMatrix(0.8, 0.2)
init = SystemBeliefState((0.3, 0.45), (0.6, 0.5), (0.55, 0.35), (0.25, 0.7))

print("H  optimum   greedy    asymmetric")
for h in (1, 2, 3, 4):
    opt = solve_optimal(init, h, chain).value
    g = evaluate_policy(joint_greedy_step, init, h, chain)
    a = evaluate_policy(asymmetric_policy_step, init, h, chain)
    print(f"{h}  {opt:.5f}  {g:.5f}  {a:.5f}")

# Fixing the breathing pattern splits the system into four independent
# single-group problems, and within each one greedy is optimal.
pattern = BreathingPattern.parse("1F,1N")
for h in (2, 3, 4):
    joint = solve_optimal(init, h, chain, constraint="pattern", pattern=pattern).value
    parts = decoupled_value(init, h, chain, pattern)
    greedy = evaluate_policy(lambda s: fixed_pattern_policy_step(s, pattern), init, h, chain,
                             constraint="pattern", pattern=pattern)
    print(f"pattern {pattern}, H={h}: joint={joint:.6f} parts={parts:.6f} greedy={greedy:.6f}")
