"""Monte Carlo episodes over true Markov channels with ARQ feedback.

Each user's channel trajectory is drawn up front from its own random stream
keyed by ``(seed, episode, cell, group, user)``.  The trajectory never
depends on the scheduling decisions, so policies compared under the same
seed see identical channel realizations (common random numbers).
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import dp_oracle
from .exceptions import CellBreathingViolation
from .markov_channel import belief_update, make_rng, sample_path, stationary_belief, t_operator
from .phy_layer import FAR, NEAR
from .scheduler_core import (
    BreathingPattern,
    GroupStep,
    JointAction,
    SystemBeliefState,
    UserRef,
    admissible_actions,
    asymmetric_policy_step,
    check_action,
    fixed_pattern_policy_step,
    joint_greedy_step,
)
from .whittle_index import SearchParams, belief_grid, cached_index, indexability_sweep, subsidy_gap

POLICIES = ("greedy", "asymmetric", "fixed-pattern", "index", "random", "optimal")

_GROUP_ID = {NEAR: 0, FAR: 1}
_SLOTS = ((1, NEAR), (1, FAR), (2, NEAR), (2, FAR))


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything that defines an episode except the episode number.

    ``initial`` defaults to the stationary belief for every user.  ``pairing``
    is only used by the index policy: ``pairing[0][i]`` is the cell-2 far user
    paired with cell-1 near user ``i`` and ``pairing[1][j]`` the cell-2 near
    user paired with cell-1 far user ``j``.
    """

    chain: object
    n_near: int
    n_far: int
    horizon: int
    seed: int
    policy: str = "greedy"
    initial: SystemBeliefState = None
    pattern: BreathingPattern = BreathingPattern()
    pairing: tuple = None
    search: SearchParams = SearchParams()
    index_horizon: int = 5
    index_shortcut: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.n_near < 1 or self.n_far < 1:
            raise ValueError("each cell needs at least one near and one far user")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.initial is None:
            x = stationary_belief(self.chain)
            object.__setattr__(self, "initial", SystemBeliefState.uniform(self.n_near, self.n_far, x,
                                                                          k=self.horizon))
        elif (self.initial.n_near, self.initial.n_far) != (self.n_near, self.n_far):
            raise ValueError("initial beliefs do not match the user counts")
        if self.policy == "index" and self.n_near != self.n_far:
            raise ValueError("permanent near-far pairing needs n_near == n_far")
        if self.n_near == self.n_far:
            pairing = self.pairing or (tuple(range(self.n_near)), tuple(range(self.n_far)))
            pairing = (tuple(pairing[0]), tuple(pairing[1]))
            if sorted(pairing[0]) != list(range(self.n_far)) or sorted(pairing[1]) != list(range(self.n_near)):
                raise ValueError("pairing must be a bijection")
            object.__setattr__(self, "pairing", pairing)


class IntervalRecord(NamedTuple):
    interval: int
    beliefs: SystemBeliefState
    action: JointAction
    states: tuple
    feedback: tuple
    reward: int


@dataclass
class EpisodeTrace:
    config: EpisodeConfig
    episode: int
    records: list = field(default_factory=list)

    @property
    def total_reward(self):
        return sum(rec.reward for rec in self.records)

    @property
    def throughput(self):
        return self.total_reward / self.config.horizon

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["interval", "cell1_user", "cell2_user", "ack1", "ack2", "reward"])
            for rec in self.records:
                w.writerow([rec.interval, rec.action.cell1.label(), rec.action.cell2.label(),
                            rec.feedback[0], rec.feedback[1], rec.reward])


def group_steps(trace, cell, group):
    """Decisions of one cell restricted to one group, on that group's own time axis."""
    return [GroupStep(rec.beliefs.group(cell, group), ref.index, rec.feedback[cell - 1])
            for rec in trace.records
            for ref in ((rec.action.cell1, rec.action.cell2)[cell - 1],)
            if ref.group == group]


# -- policies ---------------------------------------------------------------


class _Policy:
    def __init__(self, config, episode):
        self.config = config
        self.episode = episode

    def observe(self, action, feedback):
        pass


class _Stateless(_Policy):
    def __init__(self, config, episode, fn):
        super().__init__(config, episode)
        self.fn = fn

    def __call__(self, state):
        return self.fn(state)


class _RandomPolicy(_Policy):
    def __init__(self, config, episode):
        super().__init__(config, episode)
        self.rng = make_rng(config.seed, episode, 1)
        self.actions = admissible_actions(config.n_near, config.n_far)

    def __call__(self, state):
        return self.actions[int(self.rng.integers(len(self.actions)))]


class IndexPolicy(_Policy):
    """Whittle-index scheduling of permanently paired near-far projects."""

    def __init__(self, config, episode):
        super().__init__(config, episode)
        near_far, far_near = config.pairing
        # each project: (cell-1 user, cell-2 user)
        self.projects = ([JointAction(UserRef(NEAR, i), UserRef(FAR, j)) for i, j in enumerate(near_far)]
                         + [JointAction(UserRef(FAR, i), UserRef(NEAR, j)) for i, j in enumerate(far_near)])
        self.previous = None
        self.last_feedback = None

    def project_state(self, state, i):
        act = self.projects[i]
        b1, b2 = state.belief(1, act.cell1), state.belief(2, act.cell2)
        # (near belief, far belief)
        return (b1, b2) if act.cell1.group == NEAR else (b2, b1)

    def indices(self, state):
        t = min(state.k, self.config.index_horizon)
        return [cached_index(self.config.chain, t, *self.project_state(state, i), self.config.search)
                for i in range(len(self.projects))]

    def __call__(self, state):
        cfg = self.config
        candidates = range(len(self.projects))
        if cfg.index_shortcut and self.previous is not None:
            if self.last_feedback == (1, 1):
                return self.projects[self.previous]
            if self.last_feedback == (0, 0) and len(self.projects) > 1:
                candidates = [i for i in candidates if i != self.previous]
        idx = self.indices(state)
        best = max(candidates, key=lambda i: (idx[i], -i))
        self.previous = best
        return self.projects[best]

    def observe(self, action, feedback):
        self.last_feedback = tuple(feedback)


_OPTIMAL_TABLES = {}


def _optimal_policy(config):
    key = (config.chain, config.initial.key(), config.horizon)
    act = _OPTIMAL_TABLES.get(key)
    if act is None:
        table = dp_oracle.solve_optimal(replace(config.initial, k=config.horizon, elapsed=0),
                                        config.horizon, config.chain)
        act = _OPTIMAL_TABLES[key] = table.policy()
    return act


def make_policy(config, episode=0):
    name = config.policy
    if name == "greedy":
        return _Stateless(config, episode, joint_greedy_step)
    if name == "asymmetric":
        return _Stateless(config, episode, asymmetric_policy_step)
    if name == "fixed-pattern":
        return _Stateless(config, episode, lambda s: fixed_pattern_policy_step(s, config.pattern))
    if name == "random":
        return _RandomPolicy(config, episode)
    if name == "index":
        return IndexPolicy(config, episode)
    return _Stateless(config, episode, _optimal_policy(config))


# -- episodes ---------------------------------------------------------------


def _channel_paths(config, episode):
    paths = {}
    for cell, group in _SLOTS:
        beliefs = config.initial.group(cell, group)
        for i, b in enumerate(beliefs):
            rng = make_rng(config.seed, episode, 0, cell, _GROUP_ID[group], i)
            paths[(cell, group, i)] = sample_path(config.chain, b, config.horizon, rng)
    return paths


def run_episode(config, episode=0, policy=None):
    """Simulate one episode; deterministic in ``(config, episode)``.

    True initial states are drawn from the initial beliefs, the ARQ bit of
    each scheduled user is its true channel state, and beliefs then follow
    the one-step update.  An action outside the admissible set aborts the
    episode.
    """
    chain = config.chain
    policy = make_policy(config, episode) if policy is None else policy
    paths = _channel_paths(config, episode)
    beliefs = {slot: np.array(config.initial.group(*slot), dtype=float) for slot in _SLOTS}
    trace = EpisodeTrace(config, episode)
    for k in range(config.horizon):
        state = SystemBeliefState(*(beliefs[s] for s in _SLOTS), k=config.horizon - k, elapsed=k)
        try:
            action = check_action(state, policy(state))
        except (TypeError, ValueError) as exc:
            raise CellBreathingViolation(f"interval {k}: policy {config.policy!r} emitted {exc}") from exc
        s1 = int(paths[(1, action.cell1.group, action.cell1.index)][k])
        s2 = int(paths[(2, action.cell2.group, action.cell2.index)][k])
        feedback = (s1, s2)
        trace.records.append(IntervalRecord(k, state, action, (s1, s2), feedback, s1 + s2))
        policy.observe(action, feedback)
        for cell, ref, fb in ((1, action.cell1, s1), (2, action.cell2, s2)):
            beliefs[(cell, ref.group)] = belief_update(beliefs[(cell, ref.group)], ref.index, fb, chain)
            other = (cell, FAR if ref.group == NEAR else NEAR)
            beliefs[other] = t_operator(beliefs[other], chain)
    return trace


class ThroughputEstimate(NamedTuple):
    policy: str
    mean: float
    stderr: float
    episodes: int
    samples: np.ndarray


def _episode_throughputs(args):
    config, episodes = args
    return [run_episode(config, e).throughput for e in episodes]


def episode_throughputs(config, episodes, workers=1):
    """Per-episode throughput (total reward / horizon) for episodes ``0..n-1``."""
    ids = list(range(episodes))
    if workers > 1:
        chunks = [ids[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_episode_throughputs, [(config, c) for c in chunks]))
        out = np.empty(episodes)
        for chunk, vals in zip(chunks, parts):
            out[chunk] = vals
        return out
    return np.array(_episode_throughputs((config, ids)))


def estimate_throughput(config, episodes, workers=1):
    """Sample mean and standard error of the finite-horizon throughput."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    x = episode_throughputs(config, episodes, workers)
    se = float(x.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return ThroughputEstimate(config.policy, float(x.mean()), se, episodes, x)


@dataclass
class ComparisonReport:
    """Paired (common random numbers) comparison against a baseline policy."""

    baseline: str
    rows: list

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["policy", "mean", "stderr", "diff_vs_baseline", "diff_stderr", "ci95_low", "ci95_high"])
            for row in self.rows:
                w.writerow([row["policy"]] + [repr(row[k]) for k in
                                              ("mean", "stderr", "diff", "diff_stderr", "ci_low", "ci_high")])

    def row(self, policy):
        return next(r for r in self.rows if r["policy"] == policy)


def compare_policies(configs, episodes, workers=1):
    """Run each config on the same seeds; differences are against ``configs[0]``."""
    configs = list(configs)
    if not configs:
        raise ValueError("nothing to compare")
    base = configs[0]
    for cfg in configs[1:]:
        if replace(cfg, policy=base.policy) != base:
            raise ValueError("configs must differ only in their policy")
    samples = [episode_throughputs(cfg, episodes, workers) for cfg in configs]
    rows = []
    for cfg, x in zip(configs, samples):
        d = x - samples[0]
        se = float(x.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
        dse = float(d.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
        rows.append({"policy": cfg.policy, "mean": float(x.mean()), "stderr": se, "diff": float(d.mean()),
                     "diff_stderr": dse, "ci_low": float(d.mean() - 1.96 * dse),
                     "ci_high": float(d.mean() + 1.96 * dse)})
    return ComparisonReport(base.policy, rows)


SUMMARY_HEADER = ["policy", "mean", "stderr", "episodes", "horizon", "p", "r", "seed"]


def summary_rows(estimates, config):
    return [[e.policy, repr(e.mean), repr(e.stderr), e.episodes, config.horizon,
             repr(config.chain.p), repr(config.chain.r), config.seed] for e in estimates]


# -- figure data ------------------------------------------------------------

FIGURE_DEFAULTS = {
    "fig4": (0.4809, 0.3294, 5),
    "fig5": (0.4809, 0.3294, 5),
    "fig6": (0.9861, 0.2043, 5),
}


def emit_figure_data(which, path=None, chain=None, horizon=None, points=21, search=SearchParams(),
                     w_step=0.01, w_max=None, workers=1):
    """Rows behind the index figures, optionally written to ``path`` as CSV.

    ``fig4`` gives the passive-minus-active gap sampled over a subsidy grid
    for every state of a ``points x points`` belief grid.  ``fig5``/``fig6``
    give the per-state index scatter at the respective default chains.
    """
    from .markov_channel import TransitionMatrix

    if which not in FIGURE_DEFAULTS:
        raise ValueError(f"unknown figure {which!r}")
    p, r, t = FIGURE_DEFAULTS[which]
    chain = TransitionMatrix(p, r) if chain is None else chain
    horizon = t if horizon is None else horizon
    states = belief_grid(points)
    if which == "fig4":
        w_max = max(2.0, 2 * chain.p) + 0.2 if w_max is None else w_max
        ws = np.linspace(0.0, w_max, int(round(w_max / w_step)) + 1)
        header = ["pi1", "pi2", "W", "W_minus_sum", "active_minus_passive", "gap"]
        rows = []
        for st in states:
            g = subsidy_gap(ws, st, horizon, chain)
            lhs = ws - st.total
            for w, a, gg in zip(ws, lhs, g):
                rows.append([st.pi1, st.pi2, float(w), float(a), float(a - gg), float(gg)])
    else:
        report = indexability_sweep(chain, horizon, states, search, workers)
        header = ["pi1", "pi2", "sum", "w_star", "crossing_count", "fast_path"]
        rows = [[rec.state.pi1, rec.state.pi2, rec.state.total, rec.w_star, rec.crossing_count,
                 int(rec.fast_path)] for rec in report.records]
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([[repr(v) if isinstance(v, float) else v for v in row] for row in rows])
    return header, rows
