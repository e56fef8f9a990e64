"""Command-line entry point.

Subcommands read an INI config (or any output file carrying one in its
``#`` header) and write CSVs into ``--out``.  Exit codes: 0 success,
2 configuration error, 3 DP budget exceeded, 4 invariant violation.
"""

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import replace

from . import dp_oracle, simulator
from .config import header_block, load_config
from .exceptions import BudgetExceededError, ConfigError, InvariantViolation
from .markov_channel import stationary_belief
from .scheduler_core import (
    SystemBeliefState,
    asymmetric_policy_step,
    fixed_pattern_policy_step,
    joint_greedy_step,
)
from .whittle_index import ProjectState, belief_grid, indexability_sweep

log = logging.getLogger("cellbreath")

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_INVARIANT = 0, 2, 3, 4
FIGURES = ("fig4", "fig5", "fig6")
_CONSTRAINTS = {"asymmetric": "asymmetric", "fixed-pattern": "pattern", "rmab-v": "B", "two-cell": "B"}


def _write(path, cfg, header, rows):
    """CSV with the resolved config as a ``# `` header block."""
    buf = io.StringIO()
    if cfg is not None:
        buf.write(header_block(cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())
    log.info("wrote %s", path)


def _episode_config(cfg, policy):
    initial = None
    if cfg.initial is not None:
        initial = SystemBeliefState.uniform(cfg.n_near, cfg.n_far, cfg.initial, k=cfg.horizon)
    return simulator.EpisodeConfig(
        chain=cfg.chain(), n_near=cfg.n_near, n_far=cfg.n_far, horizon=cfg.horizon, seed=cfg.seed,
        policy=policy, initial=initial, pattern=cfg.breathing(), search=cfg.search(),
        index_horizon=cfg.index_horizon, index_shortcut=cfg.shortcut)


def cmd_simulate(cfg, out, workers, args):
    configs = [_episode_config(cfg, pol) for pol in cfg.policies]
    report = simulator.compare_policies(configs, cfg.episodes, workers)
    rows = [[r["policy"], repr(r["mean"]), repr(r["stderr"]), cfg.episodes, cfg.horizon, repr(cfg.p),
             repr(cfg.r), cfg.seed, repr(r["diff"]), repr(r["diff_stderr"])] for r in report.rows]
    _write(os.path.join(out, "summary.csv"), cfg,
           simulator.SUMMARY_HEADER + [f"diff_vs_{report.baseline}", "diff_stderr"], rows)
    if cfg.traces:
        for ec in configs:
            simulator.run_episode(ec, 0).to_csv(os.path.join(out, f"trace_{ec.policy}.csv"))
    for row in report.rows:
        print(f"{row['policy']:>14}  {row['mean']:.6f} +- {row['stderr']:.6f}")
    return EXIT_OK


def cmd_dp_solve(cfg, out, workers, args):
    chain = cfg.chain()
    belief = stationary_belief(chain) if cfg.initial is None else cfg.initial
    initial = SystemBeliefState.uniform(cfg.n_near, cfg.n_far, belief, k=cfg.dp_horizon)
    constraint = _CONSTRAINTS[cfg.scenario]
    pattern = cfg.breathing()
    table = dp_oracle.solve_optimal(initial, cfg.dp_horizon, chain, constraint=constraint,
                                    pattern=pattern, max_nodes=cfg.max_nodes)
    table.to_csv(os.path.join(out, "value_table.csv"))
    rows = [["optimal", repr(table.value), len(table)]]
    if cfg.greedy_check:
        policy = {"B": joint_greedy_step, "asymmetric": asymmetric_policy_step,
                  "pattern": lambda s: fixed_pattern_policy_step(s, pattern)}[constraint]
        gval = dp_oracle.evaluate_policy(policy, initial, cfg.dp_horizon, chain, constraint=constraint,
                                         pattern=pattern, max_nodes=cfg.max_nodes)
        rows.append(["greedy-family", repr(gval), ""])
        rows.append(["gap", repr(table.value - gval), ""])
    if constraint == "pattern":
        rows.append(["decoupled", repr(dp_oracle.decoupled_value(initial, cfg.dp_horizon, chain, pattern,
                                                                 cfg.max_nodes)), ""])
    _write(os.path.join(out, "dp_summary.csv"), cfg, ["quantity", "value", "nodes"], rows)
    print(f"optimal value {table.value:.9f} over {len(table)} nodes ({constraint})")
    return EXIT_OK


def _sweep_states(cfg):
    if cfg.region == "full":
        return belief_grid(cfg.points)
    lo, hi = cfg.r, cfg.p
    step = (hi - lo) / (cfg.points - 1) if cfg.points > 1 else 0.0
    axis = [lo + i * step for i in range(cfg.points)]
    return [ProjectState(a, b) for a in axis for b in axis]


def cmd_index(cfg, out, workers, args):
    report = indexability_sweep(cfg.chain(), cfg.index_horizon, _sweep_states(cfg), cfg.search(), workers)
    report.to_csv(os.path.join(out, "index_sweep.csv"))
    scatter = max(report.family_scatter().values())
    rows = [["states", len(report.records)], ["all_unique", int(report.all_unique)],
            ["worst_crossing_count", report.worst_crossing_count],
            ["separation_threshold", repr(report.separation_threshold())],
            ["max_family_scatter", repr(scatter)]]
    _write(os.path.join(out, "index_summary.csv"), cfg, ["quantity", "value"], rows)
    if args.figure:
        _emit(args.figure, out, cfg, workers)
    print(f"{len(report.records)} states, unique index: {report.all_unique}")
    if not report.all_unique:
        raise InvariantViolation(f"index not unique (worst crossing count {report.worst_crossing_count})")
    return EXIT_OK


def cmd_check_condition(cfg, out, workers, args):
    gaps = cfg.cond_gaps or None
    worst = dp_oracle.sufficient_condition_check(cfg.chain(), cfg.cond_users, cfg.cond_horizon, gaps)
    holds = worst <= 1 + 1e-9
    _write(os.path.join(out, "condition.csv"), cfg, ["max_lhs", "holds"], [[repr(worst), int(holds)]])
    print(f"max lhs {worst:.9f}; condition {'holds' if holds else 'fails'}")
    if not holds:
        raise InvariantViolation(f"sufficient condition fails: {worst} > 1")
    return EXIT_OK


def _emit(which, out, cfg, workers):
    names = FIGURES if which == "all" else (which,)
    search = cfg.search() if cfg else simulator.SearchParams()
    points = cfg.points if cfg else 21
    for name in names:
        path = os.path.join(out, f"{name}.csv")
        simulator.emit_figure_data(name, path, points=points, search=search, workers=workers)
        log.info("wrote %s", path)


def cmd_figures(cfg, out, workers, args):
    _emit(args.figure or "all", out, cfg, workers)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "dp-solve": cmd_dp_solve, "index": cmd_index,
            "check-condition": cmd_check_condition, "figures": cmd_figures}


def build_parser():
    parser = argparse.ArgumentParser(prog="cellbreath", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "figures",
                       help="INI config, or an output CSV with an embedded config header")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--figure", choices=FIGURES + ("all",), default=None)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers", "must be >= 1")
        cfg = load_config(args.config) if args.config else None
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, args.workers, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
