"""
Comparing schedulers with common random numbers
===============================================

Every policy sees the same channel realizations, so throughput differences
have far smaller error bars than the throughputs themselves.
"""

from cellbreath.markov_channel import TransitionMatrix
from cellbreath.simulator import EpisodeConfig, compare_policies

base = dict(chain=TransitionMatrix(0.9, 0.2), n_near=2, n_far=2, horizon=20, seed=11)
configs = [EpisodeConfig(policy=p, **base) for p in ("greedy", "asymmetric", "fixed-pattern", "index", "random")]
report = compare_policies(configs, episodes=300)
print(f"{'policy':>14}  {'throughput':>10}  {'vs greedy':>10}  {'paired se':>9}")
for row in report.rows:
    print(f"{row['policy']:>14}  {row['mean']:10.4f}  {row['diff']:+10.4f}  {row['diff_stderr']:9.4f}")
