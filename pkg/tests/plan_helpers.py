import math

import numpy as np

from scoutplan import Edge, TeamConfig, WorldGraph

DETOUR_Y = math.sqrt(200.0)  # 15 m legs: 2 * sqrt(25 + 200) = 30


def micro_graph(p_direct: float = 0.5) -> WorldGraph:
    """10 m direct edge with one uncertain PBP plus an always-clear
    30 m two-leg detour between the same endpoints."""
    verts = [(0.0, 0.0), (10.0, 0.0), (5.0, -DETOUR_Y)]
    edges = [
        Edge(0, 0, 1, 10.0, p_direct),
        Edge(1, 0, 2, 15.0, 0.0),
        Edge(2, 2, 1, 15.0, 0.0),
    ]
    return WorldGraph(verts, edges)


def micro_team(num_uav: int = 0) -> TeamConfig:
    return TeamConfig(
        num_ugv=1, num_uav=num_uav, ugv_speed=1.0, uav_speed=3.0,
        starts=[0], goals=[1],
        uav_starts=[(0.0, 0.0)] * num_uav)


def random_small_graph(rng: np.random.Generator, num_uncertain=None) -> WorldGraph:
    """Connected random planar-ish graph for property tests."""
    nv = int(rng.integers(4, 9))
    while True:
        pts = rng.uniform(0.0, 100.0, size=(nv, 2))
        if all(np.linalg.norm(pts[i] - pts[j]) > 1.0
               for i in range(nv) for j in range(i + 1, nv)):
            break
    pairs = []
    for i in range(1, nv):  # random spanning tree first
        j = int(rng.integers(i))
        pairs.append((j, i))
    extra = int(rng.integers(0, nv))
    all_pairs = [(i, j) for i in range(nv) for j in range(i + 1, nv)
                 if (i, j) not in pairs]
    if extra and all_pairs:
        idx = rng.choice(len(all_pairs), size=min(extra, len(all_pairs)),
                         replace=False)
        pairs.extend(all_pairs[i] for i in sorted(idx))
    probs = rng.uniform(0.05, 0.95, size=len(pairs))
    if num_uncertain is not None:
        keep = rng.choice(len(pairs), size=min(num_uncertain, len(pairs)),
                          replace=False)
        mask = np.zeros(len(pairs), dtype=bool)
        mask[keep] = True
        probs = np.where(mask, probs, 0.0)
    edges = [
        Edge(eid, u, v, float(np.linalg.norm(pts[u] - pts[v])), float(p))
        for eid, ((u, v), p) in enumerate(zip(pairs, probs))
    ]
    return WorldGraph([tuple(p) for p in pts], edges)
