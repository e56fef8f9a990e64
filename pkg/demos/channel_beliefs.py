"""
Beliefs on a Gilbert-Elliott channel
====================================

A scheduler never sees the channel directly.  It keeps a belief (the
probability the channel is ON) and refreshes it from ARQ feedback.
"""

import numpy as np

from cellbreath.markov_channel import (
    ACK,
    NACK,
    TransitionMatrix,
    belief_update,
    make_rng,
    sample_path,
    stationary_belief,
    t_power,
)

chain = TransitionMatrix(p=0.8, r=0.2)
print("stationary belief:", stationary_belief(chain))

# Without feedback a belief drifts toward the stationary value.
for k in range(1, 6):
    print(f"T^{k}(0) = {t_power(0.0, k, chain):.4f}   T^{k}(1) = {t_power(1.0, k, chain):.4f}")

# Feedback pins the scheduled user's belief to p (ACK) or r (NACK).
b = np.array([0.5, 0.5, 0.5])
b = belief_update(b, 0, ACK, chain)
print("after ACK on user 0: ", b)
b = belief_update(b, 1, NACK, chain)
print("after NACK on user 1:", b)

# A long sample path visits ON at the stationary rate.
path = sample_path(chain, 0.5, 100_000, make_rng(0))
print("empirical ON fraction:", path.mean())
