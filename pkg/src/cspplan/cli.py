"""Command-line front-end: solve / plan / simulate / logic / viz."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .arrival import SingularSystem
from .cache import PipelineCache
from .config import PlannerConfig
from .lmdp import NonConvergence
from .pipeline import run_plan, run_solve
from .sim import monte_carlo
from .tasklogic import ParseError, parse, to_dnf
from .world import SchemaError, load_scenario
from . import viz

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERIC = 3


def _json_dump(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _config_from_args(args) -> PlannerConfig:
    return PlannerConfig(epsilon=args.epsilon, cdf_mode=args.mode)


def _cache_from_args(args) -> PipelineCache | None:
    root = args.cache_dir or os.environ.get("CSP_CACHE_DIR")
    return PipelineCache(root) if root else None


def cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run_solve(scenario, _config_from_args(args), _cache_from_args(args))
    for stage in ("ensemble", "arrival", "reach"):
        status = result.stats.get(stage, "miss")
        size = result.sizes.get(stage)
        size_txt = f", {size} bytes" if size is not None else ""
        print(f"{stage:10s} {status:5s}  {result.timings[stage]:.3f}s{size_txt}")
    hits = sum(1 for v in result.stats.values() if v == "hit")
    print(f"cache hits: {hits}/3")
    return EXIT_OK


def _write_words_csv(path, scores) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", "probability", "legs"])
        for s in scores:
            legs = ";".join(
                f"{leg.goal_label}:{leg.kappa_hat!r}" for leg in s.legs
            )
            writer.writerow([">".join(s.word.labels), repr(s.probability), legs])


def cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    config = _config_from_args(args)
    result = run_plan(scenario, config, _cache_from_args(args))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    print(f"{'word':30s} {'probability':>12s}")
    for s in result.scores:
        marker = " *" if s is result.best else ""
        print(f"{'>'.join(s.word.labels):30s} {s.probability:12.6f}{marker}")
    if result.best.probability == 0.0:
        for leg in result.best.legs:
            if leg.kappa_hat == 0.0:
                print(f"task probability 0: leg to {leg.goal_label} from state "
                      f"{leg.from_state} (environment {leg.env + 1}) is infeasible")
                break

    _write_words_csv(out / "words.csv", result.scores)
    _json_dump(out / "plan.json", result.policy.to_plan_dict())
    viz.export_kappa_maps(out, scenario.grid, scenario.schedule, scenario.goals,
                          result.ctx.sol)
    print(f"artifacts written to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    config = _config_from_args(args)
    result = run_plan(scenario, config, _cache_from_args(args))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary, episodes = monte_carlo(result.policy, scenario, args.episodes,
                                    base_seed=args.seed, keep_episodes=True)
    with open(out / "episodes.jsonl", "w") as fh:
        for ep in episodes:
            fh.write(json.dumps({
                "seed": ep.seed,
                "trajectory": ep.trajectory,
                "certificates": [[c.state, c.time] for c in ep.certificates],
                "outcome": ep.outcome,
                "word_position": ep.word_position,
            }, sort_keys=True))
            fh.write("\n")
    _json_dump(out / "summary.json", {
        "episodes": summary.episodes,
        "successes": summary.successes,
        "rate": summary.rate,
        "wilson_95": list(summary.wilson),
        "base_seed": summary.base_seed,
        "predicted_probability": result.best.probability,
        "per_leg": summary.leg_arrivals,
    })
    lo, hi = summary.wilson
    print(f"success rate {summary.rate:.5f} (95% Wilson [{lo:.5f}, {hi:.5f}]) "
          f"over {summary.episodes} episodes; predicted {result.best.probability:.5f}")
    return EXIT_OK


def cmd_logic(args) -> int:
    ast = parse(args.formula)
    words = to_dnf(ast)
    for w in words:
        print(" > ".join(w.labels))
    print(f"{len(words)} word(s)")
    return EXIT_OK


def cmd_viz(args) -> int:
    scenario = load_scenario(args.scenario)
    config = _config_from_args(args)
    result = run_plan(scenario, config, _cache_from_args(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    goals = list(scenario.goals)
    if args.goal:
        goals = [g for g in goals if g.label == args.goal]
        if not goals:
            raise SchemaError(f"no goal labeled {args.goal!r}")
    envs = range(scenario.schedule.n_envs)
    if args.env is not None:
        if not 1 <= args.env <= scenario.schedule.n_envs:
            raise SchemaError(f"environment {args.env} out of range")
        envs = [args.env - 1]

    goal_markers = [(g.label, g.state) for g in scenario.goals]
    for g in goals:
        c = scenario.goals.index_of(g.label)
        for k in envs:
            stem = out / f"kappa_{g.label}_{k + 1}"
            values = result.ctx.sol.kappa[c, k]
            viz.write_pgm(stem.with_suffix(".pgm"), values, scenario.grid)
            viz.write_csv(stem.with_suffix(".csv"), values, scenario.grid)
            viz.save_heatmap_png(stem.with_suffix(".png"), values, scenario.grid,
                                 title=f"feasibility {g.label}, environment {k + 1}",
                                 obstacles=scenario.schedule.obstacles[k],
                                 goals=goal_markers)
            print(f"wrote {stem}.pgm/.csv/.png")

    if args.episodes_file:
        with open(args.episodes_file) as fh:
            for line_no, line in enumerate(fh):
                if line_no >= args.max_trajectories:
                    break
                ep = json.loads(line)
                path = out / f"trajectory_{ep['seed']}.svg"
                viz.save_trajectory_figure(
                    path, scenario.grid, ep["trajectory"], goals=goal_markers,
                    obstacles=scenario.schedule.obstacles[0],
                    title=f"episode seed {ep['seed']} "
                          f"({'satisfied' if ep['outcome'] else 'failed'})",
                )
                print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csp",
        description="Deadline-constrained goal-sequence planning on gridworlds "
                    "with time-varying obstacles.",
    )
    parser.add_argument("--cache-dir", default=None,
                        help="artifact cache directory (default: $CSP_CACHE_DIR)")
    parser.add_argument("--mode", choices=("exact", "gamma"), default="exact",
                        help="arrival CDF mode used by every stage")
    parser.add_argument("--epsilon", type=float, default=0.9,
                        help="interior desirability of the shortest-path solves")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="build/load the policy ensemble, arrival and reach artifacts")
    p.add_argument("scenario")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("plan", help="score the task's words and emit the composite plan")
    p.add_argument("scenario")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("simulate", help="Monte Carlo rollouts of the planned policy")
    p.add_argument("scenario")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("logic", help="print the DNF word list of a formula")
    p.add_argument("formula")
    p.set_defaults(fn=cmd_logic)

    p = sub.add_parser("viz", help="render feasibility maps and episode trajectories")
    p.add_argument("scenario")
    p.add_argument("--goal", default=None)
    p.add_argument("--env", type=int, default=None)
    p.add_argument("--episodes-file", default=None)
    p.add_argument("--max-trajectories", type=int, default=5)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_viz)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SchemaError, ParseError) as exc:
        if isinstance(exc, SchemaError):
            for v in exc.violations:
                print(f"schema error: {v}", file=sys.stderr)
        else:
            print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (NonConvergence, SingularSystem) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
