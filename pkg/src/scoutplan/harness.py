"""Batch experiment runner: seeded planner comparisons over generated
environments, with CSV/markdown/plot-data reporting and optional figure
rendering.

Worlds are paired: every planner in a cell set replays the same sampled
world per instance, so cross-planner differences are not washed out by
world-draw variance.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .envgen import KINDS, EnvSpec, TeamConfig, generate
from .planner import PlannerConfig, PruningConfig, run_episode
from .pruning import OracleConfig, PredictorClient

log = logging.getLogger(__name__)

PLANNERS = ("ctp", "sap", "sap-dap", "sap-iap", "sap-liap")

_STRATEGY = {"ctp": "none", "sap": "none", "sap-dap": "dap",
             "sap-iap": "iap", "sap-liap": "liap"}


@dataclass
class ExperimentSpec:
    kinds: tuple[str, ...] = KINDS
    teams: tuple[tuple[int, int], ...] = ((1, 1),)  # (num_ugv, num_uav)
    planners: tuple[str, ...] = ("ctp", "sap-dap", "sap-iap")
    instances: int = 30
    rollouts: tuple[int, ...] = (1000,)
    top_k: tuple[int, ...] = (1,)
    oracle_samples: int = 1000
    seed: int = 0
    step_cap: int = 200
    predictor_command: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        for k in self.kinds:
            if k not in KINDS:
                raise ValueError(f"unknown environment kind {k!r}")
        for p in self.planners:
            if p not in PLANNERS:
                raise ValueError(f"unknown planner {p!r}")
        for n, m in self.teams:
            if not (1 <= n <= 3 and 0 <= m <= 2):
                raise ValueError("team sizes outside the supported grid")
        if "sap-liap" in self.planners and not self.predictor_command:
            raise ValueError("sap-liap requires a predictor command")
        if self.instances < 1:
            raise ValueError("instances must be >= 1")


@dataclass
class MetricsRow:
    env: str
    planner: str
    num_ugv: int
    num_uav: int
    top_k: Optional[int]
    rollouts: int
    episodes: int
    failures: int
    mean_distance: Optional[float]
    se_distance: Optional[float]
    mean_ap_time: float
    mean_plan_time: float
    mean_steps: float
    pct_reduction: Optional[float]


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence(
        [int(p) & 0xFFFFFFFFFFFFFFFF for p in parts]).generate_state(1)[0])


def _team_for(planner: str, kind: str, env_seed: int, n: int, m: int):
    uav = 0 if planner == "ctp" else m
    graph, team = generate(EnvSpec(kind=kind, seed=env_seed,
                                   num_ugv=n, num_uav=uav))
    return graph, team


def run_experiment(spec: ExperimentSpec):
    """Run every cell; returns (metrics rows, per-episode records)."""
    predictor = None
    if "sap-liap" in spec.planners:
        predictor = PredictorClient(list(spec.predictor_command))
    episodes: list[dict] = []
    try:
        for kind_idx, kind in enumerate(spec.kinds):
            for n, m in spec.teams:
                for planner in spec.planners:
                    uses_drones = planner != "ctp" and m > 0
                    k_values = spec.top_k if uses_drones and planner != "sap" else (None,)
                    for k in k_values:
                        for rollouts in spec.rollouts:
                            _run_cell(spec, kind, kind_idx, n, m, planner, k,
                                      rollouts, predictor, episodes)
    finally:
        if predictor is not None:
            predictor.close()
    rows = aggregate(episodes)
    return rows, episodes


def _run_cell(spec, kind, kind_idx, n, m, planner, k, rollouts,
              predictor, episodes):
    planner_idx = PLANNERS.index(planner)
    for inst in range(spec.instances):
        env_seed = _derived_seed(spec.seed, 1, kind_idx, inst)
        world_seed = _derived_seed(spec.seed, 2, kind_idx, inst)
        plan_seed = _derived_seed(spec.seed, 3, kind_idx, inst,
                                  planner_idx, n, m, k or 0, rollouts)
        graph, team = _team_for(planner, kind, env_seed, n, m)
        pruning = PruningConfig(
            strategy=_STRATEGY[planner], k=k or 1,
            oracle=OracleConfig(samples=spec.oracle_samples),
            predictor=predictor if planner == "sap-liap" else None)
        cfg = PlannerConfig(rollouts=rollouts, seed=plan_seed, pruning=pruning)
        rec = {
            "env": kind, "planner": planner, "num_ugv": n,
            "num_uav": 0 if planner == "ctp" else m,
            "top_k": k, "rollouts": rollouts, "instance": inst,
            "world_seed": world_seed,
        }
        t0 = time.perf_counter()
        try:
            res = run_episode(graph, team, cfg, world_seed=world_seed,
                              step_cap=spec.step_cap)
        except Exception as exc:  # a bad episode must not sink the batch
            log.warning("episode failed (%s/%s inst %d): %s",
                        kind, planner, inst, exc)
            rec.update({"failed": True, "distance": None, "steps": None,
                        "ap_time": None, "plan_time": None,
                        "wall_time": time.perf_counter() - t0})
            episodes.append(rec)
            continue
        rec.update({
            "failed": bool(res.incomplete),
            "distance": res.total_ugv_distance,
            "steps": res.num_decision_steps,
            "ap_time": (sum(res.ap_times) / len(res.ap_times)) if res.ap_times else 0.0,
            "plan_time": (sum(res.plan_times) / len(res.plan_times)) if res.plan_times else 0.0,
            "wall_time": time.perf_counter() - t0,
        })
        episodes.append(rec)


def _cell_key(rec):
    return (rec["env"], rec["planner"], rec["num_ugv"], rec["num_uav"],
            rec["top_k"], rec["rollouts"])


def aggregate(episodes: list[dict]) -> list[MetricsRow]:
    cells: dict[tuple, list[dict]] = {}
    for rec in episodes:
        cells.setdefault(_cell_key(rec), []).append(rec)

    # Matched-baseline means: same env, team size, and rollout budget.
    ctp_means: dict[tuple, float] = {}
    for key, recs in cells.items():
        env, planner, n, _, _, rollouts = key
        if planner != "ctp":
            continue
        good = [r["distance"] for r in recs if not r["failed"]]
        if good:
            ctp_means[(env, n, rollouts)] = sum(good) / len(good)

    rows = []
    for key in sorted(cells, key=lambda k: (k[0], k[2], k[3],
                                            PLANNERS.index(k[1]),
                                            k[4] or 0, k[5])):
        env, planner, n, m, k, rollouts = key
        recs = cells[key]
        good = [r for r in recs if not r["failed"]]
        dists = [r["distance"] for r in good]
        mean_d = sum(dists) / len(dists) if dists else None
        if len(dists) > 1:
            var = sum((d - mean_d) ** 2 for d in dists) / (len(dists) - 1)
            se_d = math.sqrt(var / len(dists))
        else:
            se_d = None
        base = ctp_means.get((env, n, rollouts))
        pct = None
        if base and mean_d is not None and planner != "ctp":
            pct = 100.0 * (base - mean_d) / base
        rows.append(MetricsRow(
            env=env, planner=planner, num_ugv=n, num_uav=m,
            top_k=k, rollouts=rollouts,
            episodes=len(recs), failures=len(recs) - len(good),
            mean_distance=mean_d, se_distance=se_d,
            mean_ap_time=_mean([r["ap_time"] for r in good]),
            mean_plan_time=_mean([r["plan_time"] for r in good]),
            mean_steps=_mean([r["steps"] for r in good]),
            pct_reduction=pct))
    return rows


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return sum(xs) / len(xs) if xs else 0.0


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

_CSV_FIELDS = ["env", "planner", "num_ugv", "num_uav", "top_k", "rollouts",
               "episodes", "failures", "mean_distance", "se_distance",
               "mean_ap_time", "mean_plan_time", "mean_steps", "pct_reduction"]


def write_results_csv(path, rows: list[MetricsRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow(asdict(row))


def write_table_md(path, rows: list[MetricsRow]) -> None:
    def fmt(x, nd=1):
        return "-" if x is None else f"{x:.{nd}f}"

    lines = [
        "| Env | Planner | UGVs | UAVs | K | Rollouts | Distance (m) | SE | "
        "Reduction (%) | AP time (s) | Plan time (s) | Steps | Failures |",
        "|---|---|---|---|---|---|---|---|---|---|---|---|---|",
    ]
    for r in rows:
        lines.append(
            f"| {r.env} | {r.planner} | {r.num_ugv} | {r.num_uav} | "
            f"{r.top_k if r.top_k is not None else '-'} | {r.rollouts} | "
            f"{fmt(r.mean_distance)} | {fmt(r.se_distance)} | "
            f"{fmt(r.pct_reduction)} | {fmt(r.mean_ap_time, 3)} | "
            f"{fmt(r.mean_plan_time, 3)} | {fmt(r.mean_steps)} | "
            f"{r.failures} |")
    Path(path).write_text("\n".join(lines) + "\n")


def write_plots_json(path, episodes: list[dict]) -> None:
    cells: dict[tuple, dict] = {}
    for rec in episodes:
        key = _cell_key(rec)
        cell = cells.setdefault(key, {
            "env": key[0], "planner": key[1], "num_ugv": key[2],
            "num_uav": key[3], "top_k": key[4], "rollouts": key[5],
            "distances": [], "failed": []})
        cell["distances"].append(rec["distance"])
        cell["failed"].append(bool(rec["failed"]))
    data = {"cells": [cells[k] for k in sorted(cells, key=str)]}
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True, indent=1)
        fh.write("\n")


def render_figures(out_dir, rows: list[MetricsRow]) -> list[str]:
    """Per-environment distance comparison figures next to the CSV."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    written = []
    envs = sorted({r.env for r in rows})
    for env in envs:
        sub = [r for r in rows if r.env == env and r.mean_distance is not None]
        if not sub:
            continue
        labels = [
            f"{r.planner}"
            + (f" K={r.top_k}" if r.top_k is not None else "")
            + (f" N={r.num_ugv}M={r.num_uav}" if len({(s.num_ugv, s.num_uav) for s in sub}) > 1 else "")
            + (f" r={r.rollouts}" if len({s.rollouts for s in sub}) > 1 else "")
            for r in sub]
        means = [r.mean_distance for r in sub]
        errs = [r.se_distance or 0.0 for r in sub]
        fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(sub)), 4))
        ax.bar(range(len(sub)), means, yerr=errs, capsize=3)
        ax.set_xticks(range(len(sub)))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel("mean travel distance (m)")
        ax.set_title(env)
        fig.tight_layout()
        path = out_dir / f"distance_{env}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(str(path))

    # Rollout-budget sweep, one line per (planner, K), when swept.
    budgets = sorted({r.rollouts for r in rows})
    if len(budgets) > 1:
        for env in envs:
            series: dict[tuple, list] = {}
            for r in rows:
                if r.env == env and r.mean_distance is not None:
                    series.setdefault((r.planner, r.top_k), []).append(r)
            fig, ax = plt.subplots(figsize=(6, 4))
            for (planner, k), rs in sorted(series.items(), key=str):
                rs = sorted(rs, key=lambda r: r.rollouts)
                label = planner + (f" K={k}" if k is not None else "")
                ax.errorbar([r.rollouts for r in rs],
                            [r.mean_distance for r in rs],
                            yerr=[r.se_distance or 0.0 for r in rs],
                            marker="o", capsize=3, label=label)
            ax.set_xscale("log", base=2)
            ax.set_xlabel("rollouts per decision")
            ax.set_ylabel("mean travel distance (m)")
            ax.set_title(env)
            ax.legend(fontsize=8)
            fig.tight_layout()
            path = out_dir / f"rollout_sweep_{env}.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(str(path))
    return written


def write_report(out_dir, rows: list[MetricsRow], episodes: list[dict],
                 figures: bool = True) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(out_dir / "results.csv", rows)
    write_table_md(out_dir / "table.md", rows)
    write_plots_json(out_dir / "plots.json", episodes)
    paths = {
        "results": str(out_dir / "results.csv"),
        "table": str(out_dir / "table.md"),
        "plots": str(out_dir / "plots.json"),
    }
    if figures:
        paths["figures"] = render_figures(out_dir, rows)
    return paths
