"""Drone action pruning: distance-based scores, the Monte Carlo
value-change oracle, information-gain priorities, and the external
predictor protocol used in place of the oracle.
"""
from __future__ import annotations

import json
import logging
import math
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _fast
from .belief import IDLE, BeliefError, BeliefState, Pose
from .graph import TRAVERSABLE, UNKNOWN, WorldGraph, pose_seeds

log = logging.getLogger(__name__)

INF_SCORE = float("inf")


@dataclass
class OracleConfig:
    """Monte Carlo estimator settings for value-change queries."""
    samples: int = 1000
    disconnect_penalty: Optional[float] = None  # default: 2x total edge length
    seed: int = 0

    def penalty_for(self, graph: WorldGraph) -> float:
        if self.disconnect_penalty is not None:
            return self.disconnect_penalty
        return 2.0 * graph.total_edge_length()


@dataclass(frozen=True)
class PruneScore:
    pbp: int
    drone: int
    score: float
    travel_time: Optional[float] = None
    variance: Optional[float] = None
    team_value_change: Optional[float] = None


@dataclass(frozen=True)
class ValueChangeQuery:
    graph: WorldGraph
    belief: BeliefState
    start: Pose
    goal: int
    edge: int


def dap_score(belief: BeliefState, drone: int, pbp: int,
              live_ugvs: Optional[Sequence[int]] = None) -> PruneScore:
    """Inverse summed straight-line distance from live ground robots."""
    g = belief.graph
    if belief.edge_status[g.edge_of_pbp(pbp)] != UNKNOWN:
        raise BeliefError(f"PBP {pbp} is not unknown")
    if live_ugvs is None:
        live_ugvs = [i for i in range(belief.num_ugvs) if not belief.done_flags[i]]
    bx, by = g.node_position(pbp)
    total = 0.0
    for i in live_ugvs:
        px, py = belief.ugv_poses[i].position(g)
        total += math.hypot(px - bx, py - by)
    return PruneScore(pbp=pbp, drone=drone,
                      score=INF_SCORE if total == 0.0 else 1.0 / total)


def value_change_table(graph: WorldGraph, belief: BeliefState, start: Pose,
                       goal: int, oracle: OracleConfig):
    """Monte Carlo value change for every unknown edge at once.

    Returns (vc, se) arrays over edge ids; known edges get exact zeros.
    A single batch of sampled worlds is shared across all edges and
    both conditionings (common random numbers).
    """
    rng = np.random.default_rng(oracle.seed)
    uniforms = rng.random((oracle.samples, graph.num_edges))
    seeds = pose_seeds(graph, start)
    if start.node is not None and graph.is_pbp(start.node) and start.entry is not None:
        e = graph.edge_of_pbp(start.node)
        if belief.edge_status[e] != TRAVERSABLE:
            seeds = [(start.entry, graph.edge_lengths[e] * 0.5)]
    seed_nodes = np.array([s for s, _ in seeds], dtype=np.int64)
    seed_dists = np.array([d for _, d in seeds], dtype=np.float64)
    edge_u = np.array([e.u for e in graph.edges], dtype=np.int64)
    edge_v = np.array([e.v for e in graph.edges], dtype=np.int64)
    vc = np.empty(graph.num_edges, dtype=np.float64)
    se = np.empty(graph.num_edges, dtype=np.float64)
    _fast.value_change_table(
        graph.csr_indptr, graph.csr_to, graph.csr_len, graph.num_vertices,
        edge_u, edge_v, graph.edge_lengths,
        belief.edge_status.astype(np.uint8),
        uniforms, graph.blocking_probs,
        seed_nodes, seed_dists, int(goal), oracle.penalty_for(graph),
        vc, se)
    return vc, se


def value_change_mc(query: ValueChangeQuery, oracle: OracleConfig) -> float:
    """Blocked-vs-traversable value difference for one edge, clamped at 0."""
    if query.belief.edge_status[query.edge] != UNKNOWN:
        raise BeliefError(f"edge {query.edge} is not unknown")
    vc, _ = value_change_table(query.graph, query.belief, query.start,
                               query.goal, oracle)
    return float(vc[query.edge])


def value_change_mc_stderr(query: ValueChangeQuery, oracle: OracleConfig):
    vc, se = value_change_table(query.graph, query.belief, query.start,
                                query.goal, oracle)
    return float(vc[query.edge]), float(se[query.edge])


def iap_priority(belief: BeliefState, drone: int, pbp: int,
                 vc_provider: Callable[[int, int], float],
                 uav_speed: float,
                 live_ugvs: Optional[Sequence[int]] = None) -> PruneScore:
    """(1 / travel time) x Bernoulli variance x summed team value change."""
    g = belief.graph
    e = g.edge_of_pbp(pbp)
    if belief.edge_status[e] != UNKNOWN:
        raise BeliefError(f"PBP {pbp} is not unknown")
    if live_ugvs is None:
        live_ugvs = [i for i in range(belief.num_ugvs) if not belief.done_flags[i]]
    dx, dy = belief.uav_poses[drone - belief.num_ugvs]
    bx, by = g.node_position(pbp)
    t_a = math.hypot(dx - bx, dy - by) / uav_speed
    p = g.blocking_probs[e]
    variance = p * (1.0 - p)
    team_vc = sum(vc_provider(i, e) for i in live_ugvs)
    if t_a == 0.0:
        score = INF_SCORE
    else:
        score = (1.0 / t_a) * variance * team_vc
    return PruneScore(pbp=pbp, drone=drone, score=score, travel_time=t_a,
                      variance=variance, team_value_change=team_vc)


def rank_candidates(scores: Sequence[PruneScore]) -> list[int]:
    """PBPs by descending score, ties broken by lowest node id."""
    return [s.pbp for s in sorted(scores, key=lambda s: (-s.score, s.pbp))]


def assign_candidates(ranked_per_drone: dict[int, list[int]], k: int) -> dict[int, list[int]]:
    """Greedy distinct top-K assignment in drone-id order."""
    claimed: set[int] = set()
    out: dict[int, list[int]] = {}
    for drone in sorted(ranked_per_drone):
        picks = []
        for pbp in ranked_per_drone[drone]:
            if pbp in claimed:
                continue
            picks.append(pbp)
            claimed.add(pbp)
            if len(picks) == k:
                break
        out[drone] = picks if picks else [IDLE]
    return out


def prune_drone_actions(belief: BeliefState, strategy, k: int,
                        team=None, vc_provider=None) -> dict[int, list[int]]:
    """Per-drone candidate PBP sets under a pruning strategy.

    ``strategy`` is one of none|dap|iap; IAP needs a ``vc_provider``
    (robot id, edge id) -> meters and a team for the drone speed.
    """
    if k < 1:
        raise ValueError("top-K must be at least 1")
    n = belief.num_ugvs
    drones = list(range(n, n + belief.num_uavs))
    unknown = [belief.graph.pbp_node(int(e)) for e in belief.unknown_edges()]
    if not unknown:
        return {d: [IDLE] for d in drones}
    if strategy == "none":
        return {d: list(unknown) for d in drones}
    ranked: dict[int, list[int]] = {}
    for d in drones:
        if strategy == "dap":
            scores = [dap_score(belief, d, b) for b in unknown]
        elif strategy == "iap":
            scores = [iap_priority(belief, d, b, vc_provider, team.uav_speed)
                      for b in unknown]
        else:
            raise ValueError(f"unknown pruning strategy {strategy!r}")
        ranked[d] = rank_candidates(scores)
    return assign_candidates(ranked, k)


# ---------------------------------------------------------------------------
# External predictor protocol (newline-delimited JSON over stdio)
# ---------------------------------------------------------------------------

class PredictorError(RuntimeError):
    pass


def _pose_to_json(pose: Pose) -> dict:
    if pose.node is not None:
        return {"node": int(pose.node)}
    return {"edge": int(pose.edge), "offset": float(pose.offset)}


def build_predictor_request(req_id: int, belief: BeliefState, robot: int) -> dict:
    """One value-change request for one ground robot's start/goal pair.

    Observed edges are encoded by overwriting their blocking
    probability: traversable -> 0, blocked -> 1.
    """
    g = belief.graph
    gd = g.to_json_dict()
    for e in gd["edges"]:
        st = belief.edge_status[e["id"]]
        if st == TRAVERSABLE:
            e["p_block"] = 0.0
        elif st != UNKNOWN:
            e["p_block"] = 1.0
    nv = g.num_vertices
    return {
        "id": req_id,
        "graph": gd,
        "known": {
            "traversable": sorted(int(b) for b in belief.traversable_set),
            "blocked": sorted(int(b) for b in belief.blocked_set),
        },
        "robot": {"start": _pose_to_json(belief.ugv_poses[robot]),
                  "goal": None},
    }


class PredictorClient:
    """Talks to a spawned value-change predictor over stdin/stdout.

    One JSON request per line; responses are matched by id.  A read
    timeout surfaces as PredictorError so the planner can fall back to
    distance-based pruning for the step.
    """

    def __init__(self, command: Sequence[str], timeout: float = 5.0):
        self.command = list(command)
        self.timeout = timeout
        self._proc: Optional[subprocess.Popen] = None
        self._next_id = 0

    def _ensure_started(self):
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)

    def query(self, belief: BeliefState, robot: int, goal: int) -> dict[int, float]:
        """Per-edge predicted value change for one robot."""
        self._ensure_started()
        req = build_predictor_request(self._next_id, belief, robot)
        req["robot"]["goal"] = int(goal)
        self._next_id += 1
        line = json.dumps(req, sort_keys=True)
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PredictorError(f"predictor process unavailable: {exc}") from exc
        reply = self._read_line_with_timeout()
        data = json.loads(reply)
        if data.get("id") != req["id"]:
            raise PredictorError(
                f"response id {data.get('id')} does not match request {req['id']}")
        if "error" in data:
            raise PredictorError(str(data["error"]))
        return {int(eid): float(v) for eid, v in data["vc"].items()}

    def _read_line_with_timeout(self) -> str:
        result: list[str] = []

        def _reader():
            result.append(self._proc.stdout.readline())

        t = threading.Thread(target=_reader, daemon=True)
        t.start()
        t.join(self.timeout)
        if t.is_alive() or not result or not result[0]:
            raise PredictorError("predictor read timed out")
        return result[0]

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
