"""Acceptance suite: one test per criterion, each reporting a pass/fail line.

Numbers follow the project's acceptance list.  Every check is run at its
stated tolerance; a summary of all lines is printed at the end of the run.
"""

import itertools
import time

import numpy as np
import pytest

from cellbreath.dp_oracle import (
    decoupled_value,
    evaluate_policy,
    greedy_group_policy,
    solve_optimal,
    sufficient_condition_check,
)
from cellbreath.markov_channel import TransitionMatrix, belief_update, stationary_belief, t_operator
from cellbreath.phy_layer import FAR, NEAR, CellGeometry, Fading, PowerLevels, capture_probability
from cellbreath.phy_layer import equalizing_power_ratio
from cellbreath.scheduler_core import (
    BreathingPattern,
    GroupStep,
    SystemBeliefState,
    asymmetric_policy_step,
    fixed_pattern_policy_step,
    greedy_equals_round_robin_check,
    greedy_select,
    joint_greedy_step,
)
from cellbreath.simulator import EpisodeConfig, estimate_throughput, run_episode
from cellbreath.whittle_index import (
    ProjectState,
    SearchParams,
    active_value,
    belief_grid,
    find_w_star,
    indexability_sweep,
    passive_value,
    value,
)

FIG5 = TransitionMatrix(0.4809, 0.3294)
FIG6 = TransitionMatrix(0.9861, 0.2043)
SWEEP_CHAINS = [FIG5, FIG6, TransitionMatrix(0.8, 0.2), TransitionMatrix(0.6, 0.55), TransitionMatrix(0.99, 0.01)]
TOL = 1e-9


def square(lo, hi, points):
    axis = np.linspace(lo, hi, points)
    return [ProjectState(float(a), float(b)) for a in axis for b in axis]


def random_tuples(chain, n_states, seed):
    """Random (t, pi1, pi2) states, each paired with a vector of random subsidies."""
    rng = np.random.default_rng(seed)
    for _ in range(n_states):
        t = int(rng.integers(2, 7))
        pi1, pi2 = rng.uniform(0, 1, 2)
        ws = rng.uniform(0, 2 * chain.p + 0.5, 25)
        yield t, (float(pi1), float(pi2)), ws


def test_criterion_01_unique_crossing_fig4(acceptance):
    start = time.perf_counter()
    report = indexability_sweep(FIG5, 5, belief_grid(21))
    elapsed = time.perf_counter() - start
    wide = indexability_sweep(FIG5, 5, belief_grid(21), SearchParams(wide=True))
    counts = {r.crossing_count for r in report.records}
    ok = report.all_unique and wide.all_unique and elapsed < 60
    acceptance(1, ok, f"441 states, crossing counts {sorted(counts)}, wide scan unique={wide.all_unique}, "
                      f"{elapsed:.2f}s")
    assert ok


def _order_violations(report, spacing):
    bad = []
    recs = report.records
    for a in recs:
        for b in recs:
            if b.state.total - a.state.total >= spacing - 1e-12 and a.w_star > b.w_star:
                bad.append((a.state, b.state))
    return bad


def test_criterion_02_index_monotone_across_families(acceptance):
    spacing = 0.1
    verdicts, extra = [], []
    for name, chain in (("fig5", FIG5), ("fig6", FIG6)):
        reach = indexability_sweep(chain, 5, square(chain.r, chain.p, 21))
        bad = _order_violations(reach, spacing)
        scatter = max(reach.family_scatter().values())
        verdicts.append(not bad)
        full = indexability_sweep(chain, 5, belief_grid(21))
        full_bad = _order_violations(full, spacing)
        extra.append(f"{name}: reachable violations={len(bad)} threshold={reach.separation_threshold():.4f} "
                     f"scatter={scatter:.4f}; full-square violations={len(full_bad)} "
                     f"threshold={full.separation_threshold():.4f}")
    ok = all(verdicts)
    acceptance(2, ok, "delta>=0.1 on [r,p]^2 21x21 | " + " | ".join(extra))
    assert ok


def test_criterion_03_active_dominates_passive(acceptance):
    worst, count = np.inf, 0
    for k, chain in enumerate(SWEEP_CHAINS):
        for t, st, ws in random_tuples(chain, 400, seed=100 + k):
            diff = active_value(ws, st, t, chain) - passive_value(ws, st, t, chain)
            worst = min(worst, float(diff.min()))
            count += len(ws)
    ok = worst >= -TOL and count >= 5 * 10**4
    acceptance(3, ok, f"{count} tuples over 5 chains, min(V^A - V^P) = {worst:.3e}")
    assert ok


def test_criterion_04_active_equals_passive_outside_band(acceptance):
    worst, count = 0.0, 0
    for k, chain in enumerate(SWEEP_CHAINS):
        for t, st, ws in random_tuples(chain, 400, seed=200 + k):
            lo = np.concatenate([ws * (2 * chain.r) / ws.max(), [0.0, 2 * chain.r]])
            hi = np.concatenate([2 * chain.p + ws, [2 * chain.p]])
            for sub in (lo, hi):
                diff = np.abs(active_value(sub, st, t, chain) - passive_value(sub, st, t, chain))
                worst = max(worst, float(diff.max()))
                count += len(sub)
    lattice_dev = 0.0
    for chain in SWEEP_CHAINS:
        for t in range(1, 7):
            ws = np.array([2 * chain.p, 2 * chain.p + 0.3, 3.0])
            for st in itertools.product((chain.p, chain.r), repeat=2):
                lattice_dev = max(lattice_dev, float(np.abs(value(ws, st, t, chain) - t * ws).max()))
    ok = worst <= TOL and lattice_dev <= 1e-12
    acceptance(4, ok, f"{count} tuples, max|V^A - V^P| = {worst:.3e}; "
                      f"max|V_t - tW| on {{p,r}}^2 = {lattice_dev:.1e}")
    assert ok


def test_criterion_05_value_convexity(acceptance):
    worst, lines = 0.0, 0
    axis = np.linspace(0, 1, 201)
    for chain in SWEEP_CHAINS:
        for t in range(1, 7):
            ws = np.linspace(0, 2 * chain.p + 0.5, 401)
            for st in [(0.1, 0.7), (0.5, 0.5), (chain.r, chain.p), (0.93, 0.02)]:
                worst = min(worst, float(np.diff(value(ws, st, t, chain), 2).min()))
                lines += 1
            for w in (0.0, chain.r + chain.p, 2 * chain.p - 0.05, 2.5):
                for other in (0.2, 0.66):
                    v1 = np.array([value(w, (x, other), t, chain) for x in axis])
                    v2 = np.array([value(w, (other, x), t, chain) for x in axis])
                    worst = min(worst, float(np.diff(v1, 2).min()), float(np.diff(v2, 2).min()))
                    lines += 2
    ok = worst >= -TOL
    acceptance(5, ok, f"{lines} grid lines (W, pi1, pi2), t<=6, min second difference = {worst:.3e}")
    assert ok


def test_criterion_06_index_bounds(acceptance):
    out_err, in_bad, n_out, n_in = 0.0, 0, 0, 0
    search = SearchParams(wide=True)  # no fast path: the scan must find the root itself
    for st in belief_grid(21):
        rec = find_w_star(st, 5, FIG5, search)
        if not (2 * FIG5.r < st.total < 2 * FIG5.p):
            n_out += 1
            out_err = max(out_err, abs(rec.w_star - st.total))
        else:
            n_in += 1
            if not (st.total - TOL <= rec.w_star < 2 * FIG5.p):
                in_bad += 1
    ok = out_err <= TOL and in_bad == 0
    acceptance(6, ok, f"{n_out} states outside (2r,2p): max|w*-sum| = {out_err:.1e}; "
                      f"{n_in} inside: {in_bad} outside [sum, 2p)")
    assert ok


def test_criterion_07_greedy_optimal_on_sporadic_axis(acceptance):
    chains = [TransitionMatrix(p, r) for p in (0.6, 0.8, 0.95) for r in (0.05, 0.2, 0.5)]
    worst_gap, worst_cond, cases = 0.0, -np.inf, 0
    start = time.perf_counter()
    for chain in chains:
        pi = stationary_belief(chain)
        for n in (2, 3):
            priors = [(pi,) * n, tuple(pi + 0.03 * (i - 1) for i in range(n)),
                      tuple(np.linspace(chain.r, chain.p, n))]
            for h in range(1, 6):
                for gaps in itertools.product((1, 2), repeat=h - 1):
                    for init in priors:
                        opt = solve_optimal(init, h, chain, constraint="single-group", gaps=gaps).value
                        greedy = evaluate_policy(greedy_group_policy, init, h, chain,
                                                 constraint="single-group", gaps=gaps)
                        worst_gap = max(worst_gap, abs(opt - greedy))
                        cases += 1
                    if h >= 2:
                        worst_cond = max(worst_cond, sufficient_condition_check(chain, n, h, gaps))
    ok = worst_gap <= TOL and worst_cond <= 1 + TOL
    acceptance(7, ok, f"{cases} cases on 9 chains: max|opt - greedy| = {worst_gap:.1e}, "
                      f"max condition lhs = {worst_cond:.4f}, {time.perf_counter() - start:.1f}s")
    assert ok


def test_criterion_08_pattern_decouples(acceptance):
    chain = TransitionMatrix(0.8, 0.2)
    inits = [SystemBeliefState.uniform(2, 2, 0.5),
             SystemBeliefState((0.3, 0.45), (0.6, 0.5), (0.55, 0.35), (0.25, 0.7))]
    worst, cases = 0.0, 0
    for text in ("1F,1N", "1F,1F,1N", "1N"):
        pat = BreathingPattern.parse(text)
        for init in inits:
            for h in range(1, 5):
                joint = solve_optimal(init, h, chain, constraint="pattern", pattern=pat).value
                worst = max(worst, abs(joint - decoupled_value(init, h, chain, pat)))
                cases += 1
    ok = worst <= TOL
    acceptance(8, ok, f"{cases} cases (3 patterns, N=F=2, H<=4): max|joint - sum of parts| = {worst:.1e}")
    assert ok


def test_criterion_09_index_policy_double_feedback(acceptance):
    intervals, checked, violations = 0, 0, 0
    for chain, seed in ((FIG6, 1), (TransitionMatrix(0.8, 0.2), 2)):
        cfg = EpisodeConfig(chain, 2, 2, horizon=50, seed=seed, policy="index")
        for episode in range(100):
            recs = run_episode(cfg, episode).records
            intervals += len(recs)
            for cur, nxt in zip(recs, recs[1:]):
                if cur.feedback == (1, 1):
                    checked += 1
                    violations += nxt.action != cur.action
                elif cur.feedback == (0, 0):
                    checked += 1
                    violations += nxt.action == cur.action
    ok = violations == 0 and intervals >= 10**4
    acceptance(9, ok, f"{intervals} intervals, 4 projects, {checked} double-ACK/NACK events, "
                      f"{violations} violations")
    assert ok


def test_criterion_10_monte_carlo_matches_exact(acceptance):
    chain = TransitionMatrix(0.8, 0.2)
    horizon, episodes = 3, 10**4
    pat = BreathingPattern.parse("1F,1N")
    init = SystemBeliefState((0.3, 0.45), (0.6, 0.5), (0.55, 0.35), (0.25, 0.7), k=horizon)
    exact = {
        "greedy": evaluate_policy(joint_greedy_step, init, horizon, chain),
        "asymmetric": evaluate_policy(asymmetric_policy_step, init, horizon, chain),
        "fixed-pattern": evaluate_policy(lambda s: fixed_pattern_policy_step(s, pat), init, horizon, chain),
        "optimal": solve_optimal(init, horizon, chain).value,
    }
    z = {}
    for policy, want in exact.items():
        cfg = EpisodeConfig(chain, 2, 2, horizon, seed=10, policy=policy, initial=init, pattern=pat)
        est = estimate_throughput(cfg, episodes)
        z[policy] = (est.mean * horizon - want) / (est.stderr * horizon)
    ok = all(abs(v) <= 3 for v in z.values())
    acceptance(10, ok, f"{episodes} episodes; z-scores " + ", ".join(f"{k}={v:+.2f}" for k, v in z.items()))
    assert ok


def _greedy_group_run(beliefs, arq, gaps, chain):
    steps, b = [], np.array(beliefs, dtype=float)
    for pos, fb in enumerate(arq):
        pick = greedy_select(b)
        steps.append(GroupStep(tuple(b), pick, fb))
        b = belief_update(b, pick, fb, chain)
        for _ in range(gaps[pos] - 1):
            b = t_operator(b, chain)
    return steps


def test_criterion_11_greedy_is_round_robin(acceptance):
    chains = [TransitionMatrix(0.8, 0.2), TransitionMatrix(0.6, 0.3), TransitionMatrix(0.95, 0.1)]
    total, matched = 0, 0
    for chain in chains:
        pi = stationary_belief(chain)
        for n in (1, 2, 3):
            priors = [(pi,) * n, tuple(np.linspace(chain.p, chain.r, n + 2)[1:-1])]
            for h in range(1, 7):
                for gaps in ((1,) * h, tuple(1 + (i % 2) for i in range(h))):
                    for arq in itertools.product((0, 1), repeat=h):
                        for init in priors:
                            steps = _greedy_group_run(init, arq, gaps, chain)
                            total += len(steps)
                            if greedy_equals_round_robin_check(steps):
                                matched += len(steps)
    ok = matched == total
    acceptance(11, ok, f"{matched}/{total} greedy selections equal the order-vector head "
                       f"(N<=3, H<=6, all ARQ sequences, 3 chains)")
    assert ok


def test_criterion_12_capture_equalization(acceptance):
    geom = CellGeometry(d_near=1.0, d_far=2.0, d_cross_near=3.0, d_cross_far=2.5, alpha=3.0)
    powers = PowerLevels(equalizing_power_ratio(geom), 1.0)
    results = []
    for fading in (Fading(), Fading("gamma", m=2.0)):
        near = capture_probability(NEAR, powers, geom, 1.0, fading=fading, samples=10**6, seed=1)
        far = capture_probability(FAR, powers, geom, 1.0, fading=fading, samples=10**6, seed=2)
        results.append((fading.kind, near, far))
    ok = all(abs(n - f) < 0.01 for _, n, f in results)
    acceptance(12, ok, "ratio p1/p2 = %.4f; " % (powers.p1 / powers.p2)
               + ", ".join(f"{k}: near={n:.4f} far={f:.4f}" for k, n, f in results))
    assert ok
