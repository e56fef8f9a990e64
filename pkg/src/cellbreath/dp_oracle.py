"""Exact finite-horizon dynamic programming over reachable belief states.

Beliefs are carried symbolically as ``(base, k)`` meaning ``T^k(base)``:
an ACK restarts a belief at ``(1.0, 1) = p``, a NACK at ``(0.0, 1) = r``, and
an unobserved user just bumps ``k``.  Starting beliefs are ``(pi, 0)``.
Node identity is therefore exact and never depends on float comparisons.

Three problem families share one solver:

* the two-cell system over the cell-breathing admissible set (optionally
  restricted by a fixed breathing pattern or by the asymmetric-cooperation
  rule that cell 1 acts greedily on its own);
* a single group of users on a sporadic time axis with given gaps.
"""

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations, product

from .exceptions import BudgetExceededError, CellBreathingViolation
from .markov_channel import ACK, NACK, t_power
from .phy_layer import FAR, NEAR
from .scheduler_core import (
    BreathingPattern,
    JointAction,
    SystemBeliefState,
    UserRef,
    admissible_actions,
    asymmetric_policy_step,
    check_action,
    greedy_select,
    other_group,
)

DEFAULT_MAX_NODES = 10**7

_ACK_BASE, _NACK_BASE = 1.0, 0.0
_GROUP_ORDER = ((1, NEAR), (1, FAR), (2, NEAR), (2, FAR))


def _symbol_value(chain):
    @lru_cache(maxsize=None)
    def value(sym):
        base, k = sym
        return base if k == 0 else t_power(base, k, chain)

    return value


def _advance(syms, gap, scheduled=None, feedback=None):
    out = [(b, k + gap) for b, k in syms]
    if scheduled is not None:
        out[scheduled] = (_ACK_BASE if feedback == ACK else _NACK_BASE, gap)
    return tuple(out)


def _symbol_label(sym):
    base, k = sym
    name = {_ACK_BASE: "1", _NACK_BASE: "0"}.get(base, repr(base))
    return name if k == 0 else f"T{k}({name})"


class _TwoCellProblem:
    """Node: ``(depth, elapsed, (near1, far1, near2, far2))`` of symbol tuples."""

    kind = "two-cell"

    def __init__(self, chain, constraint="B", pattern=None):
        if constraint not in ("B", "pattern", "asymmetric"):
            raise ValueError(f"unknown constraint {constraint!r}")
        if constraint == "pattern" and pattern is None:
            raise ValueError("constraint 'pattern' needs a BreathingPattern")
        self.chain = chain
        self.constraint = constraint
        self.pattern = pattern
        self.val = _symbol_value(chain)

    def root(self, initial, horizon):
        groups = tuple(tuple((float(b), 0) for b in initial.group(c, g)) for c, g in _GROUP_ORDER)
        return (horizon, initial.elapsed, groups)

    def state(self, node):
        depth, elapsed, groups = node
        vals = [tuple(self.val(s) for s in grp) for grp in groups]
        return SystemBeliefState(*vals, k=depth, elapsed=elapsed)

    def actions(self, node):
        depth, elapsed, groups = node
        n_near, n_far = len(groups[0]), len(groups[1])
        if self.constraint == "B":
            return admissible_actions(n_near, n_far)
        if self.constraint == "pattern":
            g1 = self.pattern.group_for(1, elapsed)
            return [a for a in admissible_actions(n_near, n_far) if a.cell1.group == g1]
        ref1 = asymmetric_policy_step(self.state(node)).cell1
        g2 = other_group(ref1.group)
        n2 = n_near if g2 == NEAR else n_far
        return [JointAction(ref1, UserRef(g2, j)) for j in range(n2)]

    def check(self, node, action):
        action = check_action(self.state(node), action)
        if self.constraint == "pattern" and action.cell1.group != self.pattern.group_for(1, node[1]):
            raise CellBreathingViolation(f"action {action} violates the breathing pattern")
        return action

    def expand(self, node, action):
        depth, elapsed, groups = node
        slot1 = _GROUP_ORDER.index((1, action.cell1.group))
        slot2 = _GROUP_ORDER.index((2, action.cell2.group))
        pi1 = self.val(groups[slot1][action.cell1.index])
        pi2 = self.val(groups[slot2][action.cell2.index])
        reward = pi1 + pi2
        if depth == 1:
            return reward, []
        branches = []
        for f1, f2 in product((ACK, NACK), repeat=2):
            prob = (pi1 if f1 else 1 - pi1) * (pi2 if f2 else 1 - pi2)
            child = []
            for slot, grp in enumerate(groups):
                if slot == slot1:
                    child.append(_advance(grp, 1, action.cell1.index, f1))
                elif slot == slot2:
                    child.append(_advance(grp, 1, action.cell2.index, f2))
                else:
                    child.append(_advance(grp, 1))
            branches.append((prob, (depth - 1, elapsed + 1, tuple(child))))
        return reward, branches

    def permuted_nodes(self, node):
        depth, elapsed, groups = node
        for perms in product(*(permutations(range(len(g))) for g in groups)):
            yield (depth, elapsed, tuple(tuple(g[i] for i in perm) for g, perm in zip(groups, perms)))

    def node_label(self, node):
        depth, elapsed, groups = node
        names = ("n1", "f1", "n2", "f2")
        return " ".join(f"{n}=[{','.join(map(_symbol_label, g))}]" for n, g in zip(names, groups))

    def action_label(self, action):
        return f"{action.cell1.label()}|{action.cell2.label()}"

    def policy_key(self, state):
        return (state.k, state.elapsed, state.key())

    def node_policy_key(self, node):
        st = self.state(node)
        return self.policy_key(st)


class _GroupProblem:
    """One group on a sporadic axis. Node: ``(depth, position, symbols)``."""

    kind = "single-group"

    def __init__(self, chain, gaps):
        self.chain = chain
        self.gaps = tuple(int(g) for g in gaps)
        if any(g < 1 for g in self.gaps):
            raise ValueError("gaps must be positive integers")
        self.val = _symbol_value(chain)

    def root(self, initial, horizon, offset=0):
        if horizon - 1 > len(self.gaps):
            raise ValueError(f"need {horizon - 1} gaps for horizon {horizon}, got {len(self.gaps)}")
        return (horizon, 0, tuple((float(b), int(offset)) for b in initial))

    def state(self, node):
        return tuple(self.val(s) for s in node[2])

    def actions(self, node):
        return list(range(len(node[2])))

    def check(self, node, action):
        if not (0 <= action < len(node[2])):
            raise IndexError(f"user {action} out of range")
        return action

    def expand(self, node, action):
        depth, pos, syms = node
        pi = self.val(syms[action])
        if depth == 1:
            return pi, []
        gap = self.gaps[pos]
        return pi, [(pi, (depth - 1, pos + 1, _advance(syms, gap, action, ACK))),
                    (1 - pi, (depth - 1, pos + 1, _advance(syms, gap, action, NACK)))]

    def permuted_nodes(self, node):
        depth, pos, syms = node
        for perm in permutations(range(len(syms))):
            yield (depth, pos, tuple(syms[i] for i in perm))

    def node_label(self, node):
        return "[" + ",".join(map(_symbol_label, node[2])) + "]"

    def action_label(self, action):
        return str(action)

    def policy_key(self, beliefs):
        return tuple(beliefs)

    def node_policy_key(self, node):
        return (node[0], node[1], self.state(node))


@dataclass
class ValueTable:
    """Optimal value-to-go and action at every reachable node."""

    problem: object
    root: tuple
    values: dict = field(default_factory=dict)
    actions: dict = field(default_factory=dict)

    @property
    def value(self):
        return self.values[self.root]

    @property
    def horizon(self):
        return self.root[0]

    def __len__(self):
        return len(self.values)

    def policy(self):
        """Callable mapping a float belief state to the tabled optimal action.

        Two-cell policies take a :class:`SystemBeliefState` (whose ``k`` and
        ``elapsed`` must match the node); single-group policies take
        ``(depth, position, beliefs)``.
        """
        lookup = {self.problem.node_policy_key(n): a for n, a in self.actions.items()}
        problem = self.problem

        def act(state):
            key = problem.policy_key(state) if problem.kind == "two-cell" else tuple(state)
            try:
                return lookup[key]
            except KeyError:
                raise KeyError(f"state {state} not reachable in this table") from None

        return act

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "depth", "value", "action"])
            for node in sorted(self.values, key=lambda n: (-n[0], repr(n))):
                w.writerow([self.problem.node_label(node), node[0], repr(self.values[node]),
                            self.problem.action_label(self.actions[node])])


def _recurse(problem, root, choose, max_nodes):
    """Backward recursion; ``choose(node)`` gives the candidate actions."""
    values, best_actions = {}, {}

    def v(node):
        hit = values.get(node)
        if hit is not None:
            return hit
        best, best_a = -math.inf, None
        for a in choose(node):
            reward, branches = problem.expand(node, a)
            q = reward + sum(prob * v(child) for prob, child in branches if prob > 0)
            if q > best:
                best, best_a = q, a
        values[node] = best
        best_actions[node] = best_a
        if len(values) > max_nodes:
            raise BudgetExceededError(f"reachable tree exceeds {max_nodes} nodes")
        return best

    v(root)
    return ValueTable(problem, root, values, best_actions)


def _build(chain, initial, horizon, constraint, pattern, gaps, offset):
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if constraint == "single-group":
        gaps = (1,) * (horizon - 1) if gaps is None else gaps
        problem = _GroupProblem(chain, gaps)
        return problem, problem.root(initial, horizon, offset)
    problem = _TwoCellProblem(chain, constraint, pattern)
    return problem, problem.root(initial, horizon)


def solve_optimal(initial, horizon, chain, constraint="B", pattern=None, gaps=None, offset=0,
                  max_nodes=DEFAULT_MAX_NODES):
    """Exact optimal values over the tree of ARQ outcomes.

    ``constraint`` is one of ``"B"`` (any admissible joint action),
    ``"pattern"`` (the breathing pattern fixes the groups), ``"asymmetric"``
    (cell 1 greedy, cell 2 free within the complementary group) or
    ``"single-group"``.  For the last one ``initial`` is a belief sequence,
    ``gaps`` the spacing between consecutive instants and ``offset`` the
    number of raw intervals before the first instant.
    """
    problem, root = _build(chain, initial, horizon, constraint, pattern, gaps, offset)
    return _recurse(problem, root, problem.actions, max_nodes)


def evaluate_policy(policy, initial, horizon, chain, constraint="B", pattern=None, gaps=None,
                    offset=0, max_nodes=DEFAULT_MAX_NODES):
    """Exact expected total reward of a fixed policy.

    Two-cell policies receive a :class:`SystemBeliefState`; single-group
    policies receive the tuple of current beliefs.
    """
    problem, root = _build(chain, initial, horizon, constraint, pattern, gaps, offset)

    def choose(node):
        return [problem.check(node, policy(problem.state(node)))]

    return _recurse(problem, root, choose, max_nodes).value


def greedy_group_policy(beliefs):
    return greedy_select(beliefs)


def decoupled_value(initial, horizon, chain, pattern, max_nodes=DEFAULT_MAX_NODES):
    """Sum of the four per-cell, per-group optima under a fixed pattern."""
    total = 0.0
    for cell, group in _GROUP_ORDER:
        instants = [initial.elapsed + k for k in range(horizon)
                    if pattern.group_for(cell, initial.elapsed + k) == group]
        beliefs = initial.group(cell, group)
        if not instants or not beliefs:
            continue
        gaps = [b - a for a, b in zip(instants, instants[1:])]
        table = solve_optimal(beliefs, len(instants), chain, constraint="single-group", gaps=gaps,
                              offset=instants[0] - initial.elapsed, max_nodes=max_nodes)
        total += table.value
    return total


def round_robin_value(states, order, gaps, chain):
    """Expected reward of the order-vector policy given last-instant channel states.

    ``states`` are the 0/1 channel states at the previous instant, ``gaps[0]``
    the spacing from that instant to the first decision and ``gaps[1:]`` the
    spacing between later decisions.  The policy serves the head of ``order``
    and rotates it to the tail on NACK, never consulting beliefs.
    """
    val = _symbol_value(chain)
    decisions = len(gaps)

    @lru_cache(maxsize=None)
    def rr(syms, order, pos):
        head = order[0]
        pi = val(syms[head])
        if pos == decisions - 1:
            return pi
        g = gaps[pos + 1]
        ack = rr(_advance(syms, g, head, ACK), order, pos + 1)
        nack = rr(_advance(syms, g, head, NACK), order[1:] + order[:1], pos + 1)
        return pi + pi * ack + (1 - pi) * nack

    if decisions == 0:
        return 0.0
    syms = tuple((float(s), int(gaps[0])) for s in states)
    return rr(syms, tuple(order), 0)


def sufficient_condition_check(chain, n_users, horizon, gaps=None):
    """Largest left-hand side of the greedy-optimality sufficient condition.

    For every decision instant ``m > 1`` counted back from the horizon,
    every position ``n`` and all binary fill vectors ``Y``, ``X``, compares
    the round-robin future reward from state ``[Y 1 X 0]`` against
    ``[1 Y 0 X]`` (order ``[1..N]`` in both).  The condition holds when the
    returned maximum is at most 1; ``-inf`` means it is vacuous.

    ``gaps`` has ``horizon - 1`` entries: ``gaps[i]`` raw intervals separate
    instant ``i`` from instant ``i + 1`` (in playing order).
    """
    gaps = (1,) * (horizon - 1) if gaps is None else tuple(int(g) for g in gaps)
    if len(gaps) != horizon - 1:
        raise ValueError(f"need {horizon - 1} gaps, got {len(gaps)}")
    if n_users > 4 or horizon > 6:
        raise BudgetExceededError("exhaustive check limited to n_users <= 4, horizon <= 6")
    worst = -math.inf
    order = tuple(range(n_users))
    for m in range(2, horizon + 1):
        # decisions from t_{m-1} onward: playing-order instants horizon-m+1 .. horizon-1
        future_gaps = gaps[horizon - m:]
        for n in range(1, n_users):
            for y in product((0, 1), repeat=n - 1):
                for x in product((0, 1), repeat=n_users - n - 1):
                    a = y + (1,) + x + (0,)
                    b = (1,) + y + (0,) + x
                    diff = (round_robin_value(a, order, future_gaps, chain)
                            - round_robin_value(b, order, future_gaps, chain))
                    worst = max(worst, diff)
    return worst


def value_symmetry_check(table, tol=1e-9):
    """True iff relabelling users within a group (beliefs moving along) keeps values."""
    problem = table.problem
    for node, value in table.values.items():
        for other in problem.permuted_nodes(node):
            v = table.values.get(other)
            if v is not None and abs(v - value) > tol:
                return False
    return True
