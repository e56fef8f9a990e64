"""Two-state (Gilbert-Elliott) Markov channel and ARQ-driven belief tracking.

Every user channel is an ON/OFF chain with transition matrix

    [[p, q],
     [r, s]]

where ``p = P(ON | ON)`` and ``r = P(ON | OFF)``.  A belief is the
probability that a channel is ON in the current interval.  Unobserved
beliefs drift through the affine map ``T(x) = x (p - r) + r``.
"""

from dataclasses import dataclass

import numpy as np

ON = 1
OFF = 0
ACK = 1
NACK = 0

_TOL = 1e-12


@dataclass(frozen=True)
class TransitionMatrix:
    """Positively correlated two-state chain, parametrised by ``p`` and ``r``."""

    p: float
    r: float

    def __post_init__(self):
        for name in ("p", "r"):
            v = getattr(self, name)
            if not (-_TOL <= v <= 1 + _TOL):
                raise ValueError(f"{name}={v} is not a probability")
            object.__setattr__(self, name, float(min(max(v, 0.0), 1.0)))
        if self.p < self.r:
            raise ValueError(f"channel must be positively correlated (p={self.p} < r={self.r})")

    @classmethod
    def from_rows(cls, p, q, r, s):
        """Build from all four entries, checking that each row sums to one."""
        if abs(p + q - 1.0) > _TOL or abs(r + s - 1.0) > _TOL:
            raise ValueError(f"rows do not sum to 1: p+q={p + q}, r+s={r + s}")
        for name, v in zip("pqrs", (p, q, r, s)):
            if not (-_TOL <= v <= 1 + _TOL):
                raise ValueError(f"{name}={v} is not a probability")
        return cls(p, r)

    @property
    def q(self):
        return 1.0 - self.p

    @property
    def s(self):
        return 1.0 - self.r

    def as_array(self):
        return np.array([[self.p, self.q], [self.r, self.s]])


def t_operator(x, chain):
    """One-step belief propagation for an unobserved channel."""
    return x * (chain.p - chain.r) + chain.r


def t_power(x, l, chain):
    """``T`` applied ``l >= 1`` times.

    Computed by repeated application rather than the closed form, so a
    belief propagated step by step and one jumped ahead by ``l`` agree to
    the last bit.
    """
    if int(l) != l or l < 1:
        raise ValueError(f"l must be a positive integer, got {l}")
    for _ in range(int(l)):
        x = t_operator(x, chain)
    return x


def stationary_belief(chain):
    """Stationary ON probability ``r / (1 - p + r)``."""
    denom = 1.0 - chain.p + chain.r
    if denom <= 0.0:
        raise ValueError("chain with p=1, r=0 has no unique stationary distribution")
    return chain.r / denom


def _check_index(beliefs, scheduled):
    if not (0 <= scheduled < len(beliefs)):
        raise IndexError(f"scheduled user {scheduled} out of range for {len(beliefs)} users")


def sporadic_belief_update(beliefs, scheduled, feedback, gap, chain):
    """Belief vector at the next instant of a (possibly sparse) time axis.

    ``gap`` is the number of raw intervals between the current instant and
    the next one.  The scheduled user's belief restarts from its observed
    state; every other belief is propagated ``gap`` steps.
    """
    if int(gap) != gap or gap < 1:
        raise ValueError(f"gap must be a positive integer, got {gap}")
    beliefs = np.asarray(beliefs, dtype=float)
    _check_index(beliefs, scheduled)
    if feedback not in (ACK, NACK):
        raise ValueError(f"feedback must be ACK (1) or NACK (0), got {feedback}")
    out = beliefs.copy()
    for _ in range(int(gap)):
        out = t_operator(out, chain)
    out[scheduled] = t_power(float(feedback), gap, chain)
    return out


def belief_update(beliefs, scheduled, feedback, chain):
    """Belief vector for the next interval after one ARQ observation."""
    return sporadic_belief_update(beliefs, scheduled, feedback, 1, chain)


def sample_transition(current, chain, rng):
    """Draw the next channel state given the current one."""
    on_prob = chain.p if current == ON else chain.r
    return ON if rng.random() < on_prob else OFF


def make_rng(seed, *stream):
    """Counter-based generator for the stream identified by ``(seed, *stream)``.

    Streams with different keys are statistically independent; the same key
    always yields the same draws.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(stream))))


def sample_path(chain, initial_on_prob, length, rng):
    """Channel state trajectory of ``length`` intervals.

    The first state is ON with probability ``initial_on_prob``; each later
    state follows the chain.  One uniform draw is consumed per interval.
    """
    u = rng.random(length)
    states = np.empty(length, dtype=np.int8)
    prev = None
    for k in range(length):
        prob = initial_on_prob if prev is None else (chain.p if prev == ON else chain.r)
        prev = ON if u[k] < prob else OFF
        states[k] = prev
    return states
