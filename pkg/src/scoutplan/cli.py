"""Command line entry points: environment generation, single episodes,
dataset builds, and benchmark batches.
"""
from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from pathlib import Path

from .dataset import DatasetSpec, build_dataset
from .envgen import KINDS, EnvSpec, generate, load_env, save_env
from .harness import PLANNERS, ExperimentSpec, run_experiment, write_report
from .planner import PlannerConfig, PruningConfig, run_episode
from .pruning import OracleConfig, PredictorClient


def _cmd_gen(args) -> int:
    graph, team = generate(EnvSpec(kind=args.kind, seed=args.seed,
                                   num_ugv=args.ugv, num_uav=args.uav))
    save_env(args.out, graph, team)
    print(f"wrote {args.out}: {graph.num_vertices} vertices, "
          f"{graph.num_edges} edges, team {team.num_ugv}+{team.num_uav}")
    return 0


def _cmd_run(args) -> int:
    graph, team = load_env(args.env)
    predictor = None
    if args.planner == "sap-liap":
        if not args.predictor:
            print("sap-liap requires --predictor", file=sys.stderr)
            return 2
        predictor = PredictorClient(shlex.split(args.predictor))
    strategy = {"ctp": "none", "sap": "none", "sap-dap": "dap",
                "sap-iap": "iap", "sap-liap": "liap"}[args.planner]
    if args.planner == "ctp":
        team.uav_starts = []
        team.num_uav = 0
    cfg = PlannerConfig(
        rollouts=args.rollouts, seed=args.seed,
        pruning=PruningConfig(strategy=strategy, k=args.topk,
                              oracle=OracleConfig(samples=args.mc),
                              predictor=predictor))
    try:
        res = run_episode(graph, team, cfg, world_seed=args.world_seed,
                          step_cap=args.step_cap)
    finally:
        if predictor is not None:
            predictor.close()
    out = {
        "planner": args.planner,
        "distance": res.total_ugv_distance,
        "steps": res.num_decision_steps,
        "incomplete": res.incomplete,
        "mean_ap_time": (sum(res.ap_times) / len(res.ap_times))
        if res.ap_times else 0.0,
        "mean_plan_time": (sum(res.plan_times) / len(res.plan_times))
        if res.plan_times else 0.0,
        "world_status": [int(s) for s in res.world_status],
    }
    if args.trace:
        out["trace"] = res.trace
    if args.out:
        Path(args.out).write_text(json.dumps(out, sort_keys=True, indent=1) + "\n")
    json.dump(out, sys.stdout, sort_keys=True, indent=1)
    print()
    return 0


def _cmd_dataset(args) -> int:
    spec = DatasetSpec(num_graphs=args.graphs, robots_per_graph=args.robots,
                       kinds=tuple(args.kinds), seed=args.seed,
                       oracle=OracleConfig(samples=args.mc),
                       output=args.out)
    summary = build_dataset(spec)
    json.dump(summary.to_json_dict(), sys.stdout, sort_keys=True, indent=1)
    print()
    return 0


def _load_spec_file(path: str) -> dict:
    p = Path(path)
    if p.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(p.read_text())
    return json.loads(p.read_text())


def _cmd_bench(args) -> int:
    raw = _load_spec_file(args.spec)
    if "teams" in raw:
        raw["teams"] = tuple(tuple(t) for t in raw["teams"])
    for key in ("kinds", "planners", "rollouts", "top_k", "predictor_command"):
        if key in raw and raw[key] is not None:
            raw[key] = tuple(raw[key])
    spec = ExperimentSpec(**raw)
    rows, episodes = run_experiment(spec)
    paths = write_report(args.out, rows, episodes, figures=not args.no_figures)
    print(json.dumps(paths, sort_keys=True, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="scoutplan",
        description="Planner and benchmarks for scout-assisted navigation "
                    "on partially known road graphs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an environment file")
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--ugv", type=int, default=1)
    g.add_argument("--uav", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    r = sub.add_parser("run", help="run one planning episode")
    r.add_argument("--env", required=True)
    r.add_argument("--planner", choices=PLANNERS, default="sap-iap")
    r.add_argument("--rollouts", type=int, default=1000)
    r.add_argument("--topk", type=int, default=1,
                   help="drone candidates kept per pruning step")
    r.add_argument("--mc", type=int, default=1000,
                   help="oracle samples per value-change query")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--world-seed", type=int, default=0)
    r.add_argument("--step-cap", type=int, default=200)
    r.add_argument("--predictor", help="command line of a value-change predictor")
    r.add_argument("--trace", action="store_true")
    r.add_argument("--out", help="also write the episode result JSON here")
    r.set_defaults(func=_cmd_run)

    d = sub.add_parser("dataset", help="build a labeled training dataset")
    d.add_argument("--graphs", type=int, required=True)
    d.add_argument("--robots", type=int, default=1)
    d.add_argument("--mc", type=int, default=1000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--kinds", nargs="+", choices=KINDS, default=list(KINDS))
    d.add_argument("--out", required=True)
    d.set_defaults(func=_cmd_dataset)

    b = sub.add_parser("bench", help="run a benchmark batch")
    b.add_argument("--spec", required=True, help="TOML or JSON experiment spec")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering, emit data files only")
    b.set_defaults(func=_cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
