"""Joint actions under cell breathing and the greedy-family scheduling policies.

A system state holds, for each of the two cells, the belief vectors of its
near and far users.  Under cell breathing the two cells always serve
complementary groups, so a joint action is either ``(near in cell 1, far in
cell 2)`` or ``(far in cell 1, near in cell 2)``.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import NamedTuple

import numpy as np

from .exceptions import CellBreathingViolation
from .markov_channel import ACK, NACK
from .phy_layer import FAR, NEAR

GROUPS = (NEAR, FAR)


def other_group(group):
    return FAR if group == NEAR else NEAR


class UserRef(NamedTuple):
    group: str
    index: int

    def label(self):
        return f"{self.group[0]}{self.index}"

    @classmethod
    def parse(cls, label):
        group = {"n": NEAR, "f": FAR}[label[0]]
        return cls(group, int(label[1:]))


class JointAction(NamedTuple):
    cell1: UserRef
    cell2: UserRef

    def check(self):
        if {self.cell1.group, self.cell2.group} != {NEAR, FAR}:
            raise CellBreathingViolation(
                f"cells must serve complementary groups, got {self.cell1.group}/{self.cell2.group}"
            )
        return self

    @property
    def cell1_far(self):
        return self.cell1.group == FAR


@dataclass(frozen=True)
class SystemBeliefState:
    """Per-cell, per-group belief vectors.

    ``k`` counts the intervals remaining (including the current one) and
    ``elapsed`` the intervals already played; breathing patterns are indexed
    by ``elapsed``.
    """

    near1: tuple
    far1: tuple
    near2: tuple
    far2: tuple
    k: int = 1
    elapsed: int = 0

    def __post_init__(self):
        for name in ("near1", "far1", "near2", "far2"):
            vals = tuple(float(v) for v in getattr(self, name))
            if any(not (0.0 <= v <= 1.0) for v in vals):
                raise ValueError(f"{name} has a belief outside [0, 1]")
            object.__setattr__(self, name, vals)
        if self.k < 0:
            raise ValueError("k must be non-negative")

    @classmethod
    def uniform(cls, n_near, n_far, belief, k=1):
        return cls((belief,) * n_near, (belief,) * n_far, (belief,) * n_near, (belief,) * n_far, k)

    @property
    def n_near(self):
        return len(self.near1)

    @property
    def n_far(self):
        return len(self.far1)

    def group(self, cell, group):
        return {(1, NEAR): self.near1, (1, FAR): self.far1,
                (2, NEAR): self.near2, (2, FAR): self.far2}[(cell, group)]

    def belief(self, cell, ref):
        return self.group(cell, ref.group)[ref.index]

    def key(self):
        return (self.near1, self.far1, self.near2, self.far2)


def admissible_actions(n_near, n_far):
    """The admissible set, (near, far) pairs first, each in index order."""
    acts = [JointAction(UserRef(NEAR, i), UserRef(FAR, j)) for i, j in product(range(n_near), range(n_far))]
    acts += [JointAction(UserRef(FAR, i), UserRef(NEAR, j)) for i, j in product(range(n_far), range(n_near))]
    return acts


def check_action(state, action):
    action = JointAction(*action).check()
    for cell, ref in ((1, action.cell1), (2, action.cell2)):
        if not (0 <= ref.index < len(state.group(cell, ref.group))):
            raise CellBreathingViolation(f"cell {cell} has no {ref.group} user {ref.index}")
    return action


def immediate_reward(state, action):
    """Expected reward of a joint action: the two scheduled users' beliefs."""
    action = check_action(state, action)
    return state.belief(1, action.cell1) + state.belief(2, action.cell2)


def greedy_select(beliefs):
    """Index of the largest belief, lowest index on ties."""
    if len(beliefs) == 0:
        raise ValueError("cannot select from an empty group")
    return int(np.argmax(np.asarray(beliefs)))


def order_from_beliefs(beliefs):
    """Schedule order vector: indices by decreasing belief, ties by index."""
    return tuple(sorted(range(len(beliefs)), key=lambda i: (-beliefs[i], i)))


def order_vector_update(order, scheduled, feedback):
    """Round-robin rotation of the order vector after serving its head.

    ACK keeps the head in place; NACK sends it to the tail.
    """
    order = tuple(order)
    if not order or order[0] != scheduled:
        raise ValueError(f"scheduled user {scheduled} is not the head of {order}")
    if feedback == ACK:
        return order
    if feedback == NACK:
        return order[1:] + order[:1]
    raise ValueError(f"feedback must be ACK or NACK, got {feedback}")


def joint_greedy_step(state):
    """Myopic joint action: maximum belief sum over the admissible set."""
    best = None
    for group1 in (NEAR, FAR):
        b1, b2 = state.group(1, group1), state.group(2, other_group(group1))
        if not b1 or not b2:
            continue
        i, j = greedy_select(b1), greedy_select(b2)
        value = b1[i] + b2[j]
        if best is None or value > best[0]:
            best = (value, JointAction(UserRef(group1, i), UserRef(other_group(group1), j)))
    if best is None:
        raise ValueError("no admissible action: a group is empty in both cells")
    return best[1]


def asymmetric_policy_step(state):
    """Cell 1 greedy over all its users; cell 2 greedy in the complementary group.

    Cell 1 ranks near and far users together on their raw beliefs (near
    users first on ties).  Cell 2 only picks within the group it is forced
    into.
    """
    pooled = state.near1 + state.far1
    pick = greedy_select(pooled)
    if pick < state.n_near:
        ref1 = UserRef(NEAR, pick)
    else:
        ref1 = UserRef(FAR, pick - state.n_near)
    group2 = other_group(ref1.group)
    ref2 = UserRef(group2, greedy_select(state.group(2, group2)))
    return JointAction(ref1, ref2)


@dataclass(frozen=True)
class BreathingPattern:
    """Repeating sequence saying whether cell 1 serves far users in each interval."""

    cell1_far_seq: tuple = field(default=(True, False))

    def __post_init__(self):
        if not self.cell1_far_seq:
            raise ValueError("breathing pattern must be non-empty")
        object.__setattr__(self, "cell1_far_seq", tuple(bool(x) for x in self.cell1_far_seq))

    @classmethod
    def parse(cls, text):
        """Parse a comma-separated string over ``1F``/``1N``, e.g. ``"1F,1N"``."""
        tokens = [t.strip().upper() for t in text.split(",") if t.strip()]
        bad = [t for t in tokens if t not in ("1F", "1N")]
        if bad or not tokens:
            raise ValueError(f"pattern tokens must be 1F or 1N, got {text!r}")
        return cls(tuple(t == "1F" for t in tokens))

    def __str__(self):
        return ",".join("1F" if f else "1N" for f in self.cell1_far_seq)

    def cell1_far(self, interval):
        return self.cell1_far_seq[interval % len(self.cell1_far_seq)]

    def group_for(self, cell, interval):
        far = self.cell1_far(interval)
        if cell == 2:
            far = not far
        return FAR if far else NEAR

    def instants(self, cell, group, horizon):
        """Elapsed-interval indices at which ``cell`` serves ``group``."""
        return [k for k in range(horizon) if self.group_for(cell, k) == group]


def fixed_pattern_policy_step(state, pattern):
    """Each cell greedy within the group the pattern assigns at this interval."""
    g1 = pattern.group_for(1, state.elapsed)
    g2 = other_group(g1)
    return JointAction(UserRef(g1, greedy_select(state.group(1, g1))),
                       UserRef(g2, greedy_select(state.group(2, g2))))


class GroupStep(NamedTuple):
    """One decision on a single group's (possibly sporadic) time axis."""

    beliefs: tuple
    scheduled: int
    feedback: int


def greedy_equals_round_robin_check(steps):
    """True iff every selection is the head of the NACK-rotated order vector.

    The order vector is seeded from the first step's beliefs and afterwards
    evolves only through the ACK/NACK rotation, without looking at beliefs.
    """
    steps = list(steps)
    if not steps:
        return True
    n = len(steps[0].beliefs)
    order = order_from_beliefs(steps[0].beliefs)
    for step in steps:
        if len(step.beliefs) != n or not (0 <= step.scheduled < n) or step.feedback not in (ACK, NACK):
            raise ValueError(f"malformed step {step}")
        if step.scheduled != order[0]:
            return False
        order = order_vector_update(order, step.scheduled, step.feedback)
    return True
