"""Seeded generators for the three benchmark environments.

Bridges: two street grids separated by a river, joined by three
bridges whose blocking probabilities are tiered by path length.
Islands: four locally dense clusters with long uncertain connectors.
DenseUrban: 16 random intersections wired by Delaunay triangulation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import Delaunay

from .graph import Edge, GraphView, WorldGraph, shortest_path
from .belief import Pose

KINDS = ("bridges", "islands", "dense")


class GenerationError(RuntimeError):
    pass


@dataclass
class TeamConfig:
    num_ugv: int
    num_uav: int
    ugv_speed: float
    uav_speed: float
    starts: list[int]
    goals: list[int]
    uav_starts: list[tuple[float, float]]

    def __post_init__(self):
        if len(self.starts) != self.num_ugv or len(self.goals) != self.num_ugv:
            raise ValueError("starts/goals must list one vertex per ground robot")
        if len(self.uav_starts) != self.num_uav:
            raise ValueError("uav_starts must list one position per drone")
        if self.ugv_speed <= 0 or self.uav_speed <= 0:
            raise ValueError("robot speeds must be positive")

    def to_json_dict(self) -> dict:
        return {
            "num_ugv": self.num_ugv,
            "num_uav": self.num_uav,
            "ugv_speed": self.ugv_speed,
            "uav_speed": self.uav_speed,
            "starts": list(self.starts),
            "goals": list(self.goals),
            "uav_starts": [[float(x), float(y)] for x, y in self.uav_starts],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TeamConfig":
        return cls(num_ugv=int(d["num_ugv"]), num_uav=int(d["num_uav"]),
                   ugv_speed=float(d["ugv_speed"]), uav_speed=float(d["uav_speed"]),
                   starts=[int(s) for s in d["starts"]],
                   goals=[int(g) for g in d["goals"]],
                   uav_starts=[(float(x), float(y)) for x, y in d["uav_starts"]])


@dataclass
class EnvSpec:
    kind: str
    seed: int
    num_ugv: int = 1
    num_uav: int = 1
    ugv_speed: float = 1.0
    uav_speed: Optional[float] = None  # default: 3x ground speed

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not (1 <= self.num_ugv <= 3 and 0 <= self.num_uav <= 2):
            raise ValueError("team sizes outside supported grid")
        if self.uav_speed is None:
            self.uav_speed = 3.0 * self.ugv_speed


def generate(spec: EnvSpec) -> tuple[WorldGraph, TeamConfig]:
    if spec.kind == "bridges":
        graph, starts, goals = _gen_bridges(spec)
    elif spec.kind == "islands":
        graph, starts, goals = _gen_islands(spec)
    else:
        graph, starts, goals = _gen_dense(spec)
    uav_starts = [graph.node_position(starts[j % len(starts)])
                  for j in range(spec.num_uav)]
    team = TeamConfig(num_ugv=spec.num_ugv, num_uav=spec.num_uav,
                      ugv_speed=spec.ugv_speed, uav_speed=spec.uav_speed,
                      starts=starts, goals=goals, uav_starts=uav_starts)
    return graph, team


def _rng(spec: EnvSpec, salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([spec.seed & 0xFFFFFFFFFFFFFFFF, salt]))


def _edges_from_pairs(positions, pairs, probs):
    edges = []
    for eid, ((u, v), p) in enumerate(zip(pairs, probs)):
        length = float(np.linalg.norm(np.asarray(positions[u]) - np.asarray(positions[v])))
        edges.append(Edge(id=eid, u=u, v=v, length=length, p_block=float(p)))
    return edges


def _all_traversable_dist(graph: WorldGraph, start: int) -> np.ndarray:
    view = GraphView.optimistic(graph)
    from .graph import dijkstra_python
    dist, _ = dijkstra_python(graph, view.passable, [(start, 0.0)])
    return dist


def _maximal_distance_goals(graph: WorldGraph, starts, candidates) -> list[int]:
    goals = []
    taken = set()
    for s in starts:
        dist = _all_traversable_dist(graph, s)
        order = sorted(candidates, key=lambda v: (-dist[v], v))
        goal = next(v for v in order if v not in taken and v != s)
        goals.append(int(goal))
        taken.add(goal)
    return goals


# ---------------------------------------------------------------------------
# Bridges
# ---------------------------------------------------------------------------

def _gen_bridges(spec: EnvSpec):
    rng = _rng(spec, 0xB1)
    sx = rng.uniform(25.0, 40.0)
    sy = rng.uniform(25.0, 40.0)
    gap = rng.uniform(130.0, 170.0)

    def jitter():
        return rng.uniform(-3.0, 3.0, size=2)

    positions = []
    idx = {}
    # Top cluster: 2 rows x 3 cols; row 0 borders the river.
    for r in range(2):
        for c in range(3):
            idx[("t", r, c)] = len(positions)
            positions.append(np.array([c * sx, gap + r * sy]) + jitter())
    # Bottom cluster mirrors it below the river.
    for r in range(2):
        for c in range(3):
            idx[("b", r, c)] = len(positions)
            positions.append(np.array([c * sx, -r * sy]) + jitter())

    pairs = []
    for side in ("t", "b"):
        for r in range(2):
            for c in range(2):
                pairs.append((idx[(side, r, c)], idx[(side, r, c + 1)]))
        for c in range(3):
            pairs.append((idx[(side, 0, c)], idx[(side, 1, c)]))
    bridge_ids = []
    for c in range(3):
        bridge_ids.append(len(pairs))
        pairs.append((idx[("t", 0, c)], idx[("b", 0, c)]))

    probs = rng.uniform(0.1, 0.70, size=len(pairs))
    # Tier the bridges after ranking their start-goal path lengths.
    tier_draws = {
        "short": rng.uniform(0.45, 0.65),
        "medium": rng.uniform(0.35, 0.45),
        "long": rng.uniform(0.15, 0.25),
    }
    graph0 = WorldGraph([tuple(p) for p in positions],
                        _edges_from_pairs(positions, pairs, probs))
    starts = [idx[("t", 1, c)] for c in range(spec.num_ugv)]
    bottom_outer = [idx[("b", 1, c)] for c in range(3)]
    goals = _maximal_distance_goals(graph0, starts, bottom_outer)

    ranks = _rank_bridges(graph0, bridge_ids, starts[0], goals[0])
    for tier, eid in zip(("short", "medium", "long"), ranks):
        probs[eid] = tier_draws[tier]
    graph = WorldGraph([tuple(p) for p in positions],
                       _edges_from_pairs(positions, pairs, probs))
    return graph, starts, goals


def _rank_bridges(graph: WorldGraph, bridge_ids, start, goal) -> list[int]:
    """Bridge edge ids ordered by the length of the start-goal path forced
    through each bridge (others removed)."""
    costs = []
    for b in bridge_ids:
        passable = np.ones(graph.num_edges, dtype=np.uint8)
        for other in bridge_ids:
            if other != b:
                passable[other] = 0
        view = GraphView(graph, passable, "forced")
        res = shortest_path(graph, view, Pose.at_node(start), goal)
        costs.append((res[0] if res else math.inf, b))
    costs.sort()
    return [b for _, b in costs]


# ---------------------------------------------------------------------------
# Islands
# ---------------------------------------------------------------------------

def _gen_islands(spec: EnvSpec):
    rng = _rng(spec, 0x15)
    d = rng.uniform(140.0, 175.0)
    centers = np.array([[0.0, 0.0], [d, 0.0], [d, d], [0.0, d]])
    positions = []
    clusters = []
    for c in range(4):
        k = int(rng.integers(4, 6))  # 4 or 5 vertices
        r = rng.uniform(10.0, 16.0)
        ids = []
        for i in range(k):
            ang = 2 * math.pi * i / k + rng.uniform(-0.25, 0.25)
            rad = r + rng.uniform(-2.0, 2.0)
            ids.append(len(positions))
            positions.append(centers[c] + rad * np.array([math.cos(ang), math.sin(ang)]))
        clusters.append(ids)

    pairs = []
    probs = []
    for ids in clusters:
        k = len(ids)
        for i in range(k):
            pairs.append((ids[i], ids[(i + 1) % k]))
            probs.append(rng.uniform(0.0, 0.2))
        if k == 5:  # one chord keeps larger islands locally dense
            pairs.append((ids[0], ids[2]))
            probs.append(rng.uniform(0.0, 0.2))
    # Connector ring plus one diagonal for alternative routes.
    links = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]
    for a, b in links:
        u, v = _closest_pair(positions, clusters[a], clusters[b])
        pairs.append((u, v))
        probs.append(rng.uniform(0.20, 0.65))

    graph = WorldGraph([tuple(p) for p in positions],
                       _edges_from_pairs(positions, pairs, probs))
    starts = clusters[0][:spec.num_ugv]
    candidates = [v for ids in clusters[1:] for v in ids]
    goals = _maximal_distance_goals(graph, starts, candidates)
    return graph, starts, goals


def _closest_pair(positions, ids_a, ids_b):
    best = None
    for u in ids_a:
        for v in ids_b:
            dd = float(np.linalg.norm(np.asarray(positions[u]) - np.asarray(positions[v])))
            if best is None or dd < best[0]:
                best = (dd, u, v)
    return best[1], best[2]


# ---------------------------------------------------------------------------
# Dense urban
# ---------------------------------------------------------------------------

_DENSE_VERTICES = 16
_DENSE_MIN_SPACING = 20.0
_DENSE_MAX_EDGE = 40.0
_DENSE_EDGE_RANGE = (28, 30)
_DENSE_RETRIES = 256


def _gen_dense(spec: EnvSpec):
    for attempt in range(_DENSE_RETRIES):
        rng = np.random.default_rng(
            np.random.SeedSequence([spec.seed & 0xFFFFFFFFFFFFFFFF, 0xDE, attempt]))
        result = _try_dense(rng, spec)
        if result is not None:
            return result
    raise GenerationError(
        f"dense generator failed to hit {_DENSE_EDGE_RANGE} edges "
        f"after {_DENSE_RETRIES} attempts (seed {spec.seed})")


def _try_dense(rng, spec: EnvSpec):
    # Elongated town footprint: start (leftmost) to goal spans the
    # long axis, so scouting flights are meaningfully long.
    extent = np.array([170.0, 80.0])
    points = []
    tries = 0
    while len(points) < _DENSE_VERTICES and tries < 5000:
        p = rng.uniform(0.0, 1.0, size=2) * extent
        tries += 1
        if all(np.linalg.norm(p - q) >= _DENSE_MIN_SPACING for q in points):
            points.append(p)
    if len(points) < _DENSE_VERTICES:
        return None
    pts = np.array(points)
    tri = Delaunay(pts)
    pair_set = set()
    for simplex in tri.simplices:
        for i in range(3):
            a, b = int(simplex[i]), int(simplex[(i + 1) % 3])
            pair_set.add((min(a, b), max(a, b)))
    pairs = [(u, v) for u, v in sorted(pair_set)
             if np.linalg.norm(pts[u] - pts[v]) <= _DENSE_MAX_EDGE]
    if not _pairs_connected(pairs, _DENSE_VERTICES):
        return None
    # Trim the longest removable edges down to the target count.
    while len(pairs) > _DENSE_EDGE_RANGE[1]:
        by_len = sorted(pairs, key=lambda uv: -np.linalg.norm(pts[uv[0]] - pts[uv[1]]))
        for cand in by_len:
            rest = [p for p in pairs if p != cand]
            if _pairs_connected(rest, _DENSE_VERTICES):
                pairs = rest
                break
        else:
            return None
    if len(pairs) < _DENSE_EDGE_RANGE[0]:
        return None

    ne = len(pairs)
    n_high = int(round(0.4 * ne))
    high = set(rng.choice(ne, size=n_high, replace=False).tolist())
    probs = [rng.uniform(0.6, 0.8) if e in high else rng.uniform(0.1, 0.6)
             for e in range(ne)]
    graph = WorldGraph([tuple(p) for p in pts], _edges_from_pairs(pts, pairs, probs))
    order = np.argsort(pts[:, 0], kind="stable")
    starts = [int(v) for v in order[:spec.num_ugv]]
    goals = _maximal_distance_goals(graph, starts, list(range(_DENSE_VERTICES)))
    return graph, starts, goals


def _pairs_connected(pairs, nv) -> bool:
    adj = [[] for _ in range(nv)]
    for u, v in pairs:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        for m in adj[stack.pop()]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return len(seen) == nv


# ---------------------------------------------------------------------------
# Env files: graph JSON plus a team section
# ---------------------------------------------------------------------------

def save_env(path, graph: WorldGraph, team: TeamConfig) -> None:
    data = graph.to_json_dict()
    data["team"] = team.to_json_dict()
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_env(path) -> tuple[WorldGraph, TeamConfig]:
    with open(path) as fh:
        data = json.load(fh)
    return WorldGraph.from_json_dict(data), TeamConfig.from_json_dict(data["team"])
