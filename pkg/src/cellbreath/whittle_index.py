"""Single-project subsidy recursion and Whittle-index search for near-far pairs.

A project is a (near, far) user pair scheduled together.  Under a passivity
subsidy ``W`` its finite-horizon value obeys

    V_1(W, a, b) = max(W, a + b)
    V_t(W, a, b) = max(W + V_t^P, a + b + V_t^A)
    V_t^P        = V_{t-1}(W, T(a), T(b))
    V_t^A        = sum over ARQ outcomes of P(outcome) * V_{t-1}(W, {p,r}, {p,r})

The index at ``(t, a, b)`` is the subsidy where the passive and active
branches tie.  ``W`` may be a numpy array, in which case the whole subsidy
grid is evaluated in one pass over the (small) reachable state set.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect

from .markov_channel import t_power

_ACK, _NACK = (1.0, 1), (0.0, 1)  # symbols for p = T(1) and r = T(0)
_ZERO_TOL = 1e-12


class ProjectState(NamedTuple):
    pi1: float
    pi2: float

    @property
    def total(self):
        return self.pi1 + self.pi2


def _as_state(state):
    pi1, pi2 = (float(v) for v in state)
    if not (0.0 <= pi1 <= 1.0 and 0.0 <= pi2 <= 1.0):
        raise ValueError(f"project beliefs must lie in [0, 1], got {state}")
    return ProjectState(pi1, pi2)


class _Recursion:
    """Memoised value recursion at a fixed subsidy (scalar or array)."""

    def __init__(self, chain, w):
        self.chain = chain
        self.w = w
        self.memo = {}
        self._vals = {}

    def val(self, sym):
        out = self._vals.get(sym)
        if out is None:
            base, k = sym
            out = base if k == 0 else t_power(base, k, self.chain)
            self._vals[sym] = out
        return out

    def value(self, s1, s2, t):
        if t == 0:
            return 0.0
        key = (t,) + ((s1, s2) if s1 <= s2 else (s2, s1))
        out = self.memo.get(key)
        if out is None:
            a, b = self.val(s1), self.val(s2)
            if t == 1:
                out = np.maximum(self.w, a + b)
            else:
                out = np.maximum(self.w + self.passive(s1, s2, t), a + b + self.active(s1, s2, t))
            self.memo[key] = out
        return out

    def active(self, s1, s2, t):
        a, b = self.val(s1), self.val(s2)
        return (a * b * self.value(_ACK, _ACK, t - 1)
                + a * (1 - b) * self.value(_ACK, _NACK, t - 1)
                + (1 - a) * b * self.value(_NACK, _ACK, t - 1)
                + (1 - a) * (1 - b) * self.value(_NACK, _NACK, t - 1))

    def passive(self, s1, s2, t):
        return self.value((s1[0], s1[1] + 1), (s2[0], s2[1] + 1), t - 1)


def _prepare(w, state, t):
    if t < 1:
        raise ValueError("horizon t must be >= 1")
    st = _as_state(state)
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("subsidy W must be non-negative")
    return (w if w.ndim else float(w)), st


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


def value(w, state, t, chain):
    """``V_t(W, pi1, pi2)``; vectorised over ``w``."""
    w, st = _prepare(w, state, t)
    return _unwrap(_Recursion(chain, w).value((st.pi1, 0), (st.pi2, 0), t))


def active_value(w, state, t, chain):
    """Expected future reward after scheduling the pair at ``t >= 2``."""
    w, st = _prepare(w, state, t)
    if t < 2:
        raise ValueError("active value is defined for t >= 2")
    return _unwrap(_Recursion(chain, w).active((st.pi1, 0), (st.pi2, 0), t))


def passive_value(w, state, t, chain):
    """Expected future reward after idling the pair at ``t >= 2``."""
    w, st = _prepare(w, state, t)
    if t < 2:
        raise ValueError("passive value is defined for t >= 2")
    return _unwrap(_Recursion(chain, w).passive((st.pi1, 0), (st.pi2, 0), t))


def subsidy_gap(w, state, t, chain):
    """``[W + V^P] - [pi1 + pi2 + V^A]``; negative means activity is preferred."""
    w, st = _prepare(w, state, t)
    if t < 2:
        raise ValueError("subsidy gap is defined for t >= 2")
    rec = _Recursion(chain, w)
    s1, s2 = (st.pi1, 0), (st.pi2, 0)
    return _unwrap(w + rec.passive(s1, s2, t) - st.total - rec.active(s1, s2, t))


@dataclass(frozen=True)
class SearchParams:
    """Subsidy scan settings.

    The default bracket ``[pi1 + pi2, 2p]`` always contains the index; with
    ``wide=True`` the scan covers ``[0, max(2p, pi1 + pi2) + margin]`` instead
    to expose crossings the bracket could hide.
    """

    grid_step: float = 1e-3
    tol: float = 1e-9
    wide: bool = False
    margin: float = 0.5

    def __post_init__(self):
        if self.grid_step <= 0 or self.tol <= 0:
            raise ValueError("grid_step and tol must be positive")


@dataclass
class IndexRecord:
    horizon: int
    state: ProjectState
    w_star: float
    crossing_count: int
    fast_path: bool
    roots: tuple = ()

    @property
    def indexable(self):
        return self.crossing_count == 1


def _signs(g):
    s = np.sign(g).astype(int)
    s[np.abs(g) <= _ZERO_TOL] = 0
    return s


def count_crossings(grid, g, refine=None, tol=1e-9):
    """Roots of a sampled function: sign changes plus runs of exact zeros.

    A run of several zero samples is an interval of roots and counts twice,
    since the root is then not unique.  ``refine(lo, hi)`` locates a root
    inside a bracketing grid cell; without it the cell midpoint is used.
    """
    s = _signs(np.asarray(g))
    roots, count = [], 0
    i, n = 0, len(s)
    while i < n:
        if s[i] == 0:
            j = i
            while j + 1 < n and s[j + 1] == 0:
                j += 1
            count += 1 if j == i else 2
            roots.append(float(grid[i]))
            i = j + 1
            continue
        if i + 1 < n and s[i] * s[i + 1] == -1:
            count += 1
            lo, hi = float(grid[i]), float(grid[i + 1])
            roots.append(refine(lo, hi) if refine else 0.5 * (lo + hi))
        i += 1
    return count, roots


def _grid(lo, hi, step):
    n = max(2, int(math.ceil((hi - lo) / step - 1e-9)) + 1)
    return np.linspace(lo, hi, n)


def find_w_star(state, t, chain, search=SearchParams()):
    """Index of a project state: the subsidy where passive and active values tie.

    Outside ``(2r, 2p)`` the index is the belief sum (no scan needed).  Inside,
    the gap function is sampled on the search grid, sign changes are counted
    and each is refined by bisection.  ``crossing_count == 0`` flags that no
    root was found, which would contradict the bracketing bound.
    """
    st = _as_state(state)
    total = st.total
    if t == 1 or not (2 * chain.r < total < 2 * chain.p):
        if not search.wide or t == 1:
            return IndexRecord(t, st, total, 1, True, (total,))
    if search.wide:
        lo, hi = 0.0, max(2 * chain.p, total) + search.margin
    else:
        lo, hi = total, 2 * chain.p
    grid = _grid(lo, hi, search.grid_step)
    g = subsidy_gap(grid, st, t, chain)

    def f(w):
        return subsidy_gap(w, st, t, chain)

    count, roots = count_crossings(grid, g, lambda a, b: bisect(f, a, b, xtol=search.tol), search.tol)
    w_star = roots[0] if roots else math.nan
    return IndexRecord(t, st, w_star, count, False, tuple(roots))


@dataclass
class SweepReport:
    chain: object
    horizon: int
    search: SearchParams
    records: list = field(default_factory=list)

    @property
    def all_unique(self):
        return all(r.crossing_count == 1 for r in self.records)

    @property
    def worst_crossing_count(self):
        return max((r.crossing_count for r in self.records), default=0)

    def families(self, decimals=9):
        """Records grouped by belief sum."""
        fam = {}
        for rec in self.records:
            fam.setdefault(round(rec.state.total, decimals), []).append(rec)
        return dict(sorted(fam.items()))

    def family_scatter(self):
        """Spread ``max - min`` of the index within each equal-sum family."""
        return {s: max(r.w_star for r in recs) - min(r.w_star for r in recs)
                for s, recs in self.families().items()}

    def separation_threshold(self, slack=None):
        """Largest sum gap between two states whose indices are out of order.

        Index order agrees with belief-sum order for every pair of families
        further apart than this.  Zero when the index is monotone in the sum
        over the whole grid.
        """
        slack = self.search.tol if slack is None else slack
        sums = np.array([r.state.total for r in self.records])
        ws = np.array([r.w_star for r in self.records])
        ds = sums[None, :] - sums[:, None]
        bad = (ds > 1e-12) & (ws[:, None] > ws[None, :] + slack)
        return float(ds[bad].max()) if bad.any() else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pi1", "pi2", "sum", "w_star", "crossing_count", "fast_path"])
            for r in self.records:
                w.writerow([repr(r.state.pi1), repr(r.state.pi2), repr(r.state.total),
                            repr(r.w_star), r.crossing_count, int(r.fast_path)])


def _sweep_chunk(args):
    states, t, chain, search = args
    return [find_w_star(s, t, chain, search) for s in states]


def belief_grid(points=21):
    """Square grid over ``[0, 1]^2`` with ``points`` values per axis."""
    axis = np.linspace(0.0, 1.0, points)
    return [ProjectState(float(a), float(b)) for a in axis for b in axis]


def indexability_sweep(chain, t, states=None, search=SearchParams(), workers=1):
    """Run the index search over a set of states and collect the verdicts."""
    states = belief_grid() if states is None else [_as_state(s) for s in states]
    if workers > 1:
        chunks = [states[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_sweep_chunk, [(c, t, chain, search) for c in chunks]))
        by_state = {(r.state, i): r for i, part in enumerate(parts) for r in part}
        records = [by_state[(s, i % workers)] for i, s in enumerate(states)]
    else:
        records = _sweep_chunk((states, t, chain, search))
    return SweepReport(chain, t, search, records)


@lru_cache(maxsize=200_000)
def cached_index(chain, t, pi1, pi2, search=SearchParams()):
    """``find_w_star(...).w_star`` memoised on exact belief values."""
    return find_w_star((pi1, pi2), t, chain, search).w_star


def index_policy_select(projects, t, chain, search=SearchParams(), previous=None, feedback=None,
                        shortcut=False):
    """Project with the largest index (lowest position on ties).

    With ``shortcut=True`` and the last decision's ``previous`` project and
    its two ARQ bits given, a double ACK reschedules the same pair and a
    double NACK rules it out without computing its index.
    """
    projects = [_as_state(s) for s in projects]
    if not projects:
        raise ValueError("no projects to choose from")
    candidates = range(len(projects))
    if shortcut and previous is not None and feedback is not None:
        if tuple(feedback) == (1, 1):
            return previous
        if tuple(feedback) == (0, 0) and len(projects) > 1:
            candidates = [i for i in candidates if i != previous]
    best, best_i = -math.inf, None
    for i in candidates:
        idx = cached_index(chain, t, projects[i].pi1, projects[i].pi2, search)
        if idx > best:
            best, best_i = idx, i
    return best_i
