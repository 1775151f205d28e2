"""Offline training data for the learned value-change predictor.

Each example pairs one generated graph with one robot start/goal and
per-edge Monte Carlo value-change labels, serialized as one JSON object
per line (optionally gzipped).  Deterministic edges (p in {0, 1}) are
masked out with a label of exactly zero.
"""
from __future__ import annotations

import gzip
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .belief import BeliefState, Pose
from .envgen import KINDS, EnvSpec, generate
from .graph import WorldGraph
from .pruning import OracleConfig, value_change_table

log = logging.getLogger(__name__)

_MIN_PAIR_HOPS = 3


class DatasetError(ValueError):
    pass


@dataclass
class DatasetSpec:
    num_graphs: int
    robots_per_graph: int = 1
    kinds: tuple[str, ...] = KINDS
    oracle: OracleConfig = field(default_factory=OracleConfig)
    seed: int = 0
    output: str = "data.ndjson"

    def __post_init__(self):
        if self.num_graphs < 1:
            raise DatasetError("num_graphs must be >= 1")
        if self.robots_per_graph < 1:
            raise DatasetError("robots_per_graph must be >= 1")
        for k in self.kinds:
            if k not in KINDS:
                raise DatasetError(f"unknown environment kind {k!r}")


@dataclass
class DatasetSummary:
    num_instances: int
    num_skipped: int
    label_mean: float
    label_max: float
    zero_fraction: float

    def to_json_dict(self) -> dict:
        return {
            "num_instances": self.num_instances,
            "num_skipped": self.num_skipped,
            "label_mean": self.label_mean,
            "label_max": self.label_max,
            "zero_fraction": self.zero_fraction,
        }


def make_instance(graph: WorldGraph, start: int, goal: int,
                  oracle: OracleConfig) -> dict:
    """Label every uncertain edge of one graph for one start/goal pair."""
    belief = BeliefState.initial(graph, [start], [])
    vc, _ = value_change_table(graph, belief, Pose.at_node(start), goal, oracle)
    p = graph.blocking_probs
    mask = [(0.0 < float(x) < 1.0) for x in p]
    labels = [float(vc[e]) if mask[e] else 0.0 for e in range(graph.num_edges)]
    node_features = []
    for u in range(graph.num_vertices):
        node_features.append([1, 0] if u == start
                             else [0, 1] if u == goal else [0, 0])
    edge_features = [[float(graph.edge_lengths[e]), float(p[e])]
                     for e in range(graph.num_edges)]
    return {
        "graph": graph.to_json_dict(),
        "robot": {"start": int(start), "goal": int(goal)},
        "node_features": node_features,
        "edge_features": edge_features,
        "labels": labels,
        "mask": mask,
    }


def validate_instance(inst: dict) -> None:
    graph = WorldGraph.from_json_dict(inst["graph"])
    start = inst["robot"]["start"]
    goal = inst["robot"]["goal"]
    nf = inst["node_features"]
    if len(nf) != graph.num_vertices:
        raise DatasetError("node features must cover every vertex")
    starts = [u for u, x in enumerate(nf) if x == [1, 0]]
    goals = [u for u, x in enumerate(nf) if x == [0, 1]]
    if starts != [start] or goals != [goal]:
        raise DatasetError("exactly one start [1,0] and one goal [0,1] required")
    for u, x in enumerate(nf):
        if x not in ([1, 0], [0, 1], [0, 0]):
            raise DatasetError(f"invalid node feature {x} at vertex {u}")
    ef = inst["edge_features"]
    labels = inst["labels"]
    mask = inst["mask"]
    if not (len(ef) == len(labels) == len(mask) == graph.num_edges):
        raise DatasetError("edge arrays must cover every edge")
    for e in range(graph.num_edges):
        d, p = ef[e]
        if abs(d - graph.edge_lengths[e]) > 1e-9 * max(d, 1.0):
            raise DatasetError(f"edge feature length mismatch on edge {e}")
        if abs(p - graph.blocking_probs[e]) > 1e-12:
            raise DatasetError(f"edge feature probability mismatch on edge {e}")
        if labels[e] < 0.0:
            raise DatasetError(f"negative label on edge {e}")
        expect_mask = 0.0 < p < 1.0
        if bool(mask[e]) != expect_mask:
            raise DatasetError(f"mask must be (0 < p < 1) on edge {e}")
        if not expect_mask and labels[e] != 0.0:
            raise DatasetError(f"masked-out edge {e} must have label 0")


def _hop_distances(graph: WorldGraph, start: int) -> list[int]:
    dist = [-1] * graph.num_vertices
    dist[start] = 0
    q = deque([start])
    while q:
        u = q.popleft()
        for eid in graph.incident_edges(u):
            e = graph.edges[eid]
            w = e.v if e.u == u else e.u
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def _sample_pairs(graph: WorldGraph, canonical: tuple[int, int],
                  count: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Canonical start/goal plus random distinct pairs >= 3 hops apart."""
    pairs = [canonical]
    seen = {canonical}
    guard = 0
    while len(pairs) < count and guard < 200 * count:
        guard += 1
        s = int(rng.integers(graph.num_vertices))
        hops = _hop_distances(graph, s)
        far = [v for v in range(graph.num_vertices) if hops[v] >= _MIN_PAIR_HOPS]
        if not far:
            continue
        g = int(far[rng.integers(len(far))])
        if (s, g) not in seen:
            seen.add((s, g))
            pairs.append((s, g))
    return pairs


def _open_out(path, mode):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode + "t")
    return open(path, mode)


def build_dataset(spec: DatasetSpec) -> DatasetSummary:
    """Generate, label, validate, and write every instance in spec order."""
    count = 0
    skipped = 0
    label_sum = 0.0
    label_max = 0.0
    zero = 0
    masked = 0
    with _open_out(spec.output, "w") as fh:
        for g_idx in range(spec.num_graphs):
            kind = spec.kinds[g_idx % len(spec.kinds)]
            base = np.random.SeedSequence(
                [spec.seed & 0xFFFFFFFFFFFFFFFF, g_idx])
            env_seed = int(base.generate_state(1)[0])
            graph, team = generate(EnvSpec(kind=kind, seed=env_seed,
                                           num_ugv=1, num_uav=0))
            rng = np.random.default_rng(
                np.random.SeedSequence([spec.seed & 0xFFFFFFFFFFFFFFFF, g_idx, 1]))
            pairs = _sample_pairs(graph, (team.starts[0], team.goals[0]),
                                  spec.robots_per_graph, rng)
            for r_idx, (s, g) in enumerate(pairs):
                oracle_seed = int(np.random.SeedSequence(
                    [spec.seed & 0xFFFFFFFFFFFFFFFF, g_idx, 2, r_idx]).generate_state(1)[0])
                oracle = OracleConfig(samples=spec.oracle.samples,
                                      disconnect_penalty=spec.oracle.disconnect_penalty,
                                      seed=oracle_seed)
                try:
                    inst = make_instance(graph, s, g, oracle)
                    validate_instance(inst)
                except (DatasetError, ValueError) as exc:
                    skipped += 1
                    log.warning("skipping instance (graph %d, robot %d): %s",
                                g_idx, r_idx, exc)
                    continue
                fh.write(json.dumps(inst, sort_keys=True) + "\n")
                count += 1
                for lab, m in zip(inst["labels"], inst["mask"]):
                    if not m:
                        continue
                    masked += 1
                    label_sum += lab
                    label_max = max(label_max, lab)
                    if lab == 0.0:
                        zero += 1
    return DatasetSummary(
        num_instances=count,
        num_skipped=skipped,
        label_mean=label_sum / masked if masked else 0.0,
        label_max=label_max,
        zero_fraction=zero / masked if masked else 0.0,
    )


def read_dataset(path, validate: bool = True) -> Iterator[dict]:
    with _open_out(path, "r") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            inst = json.loads(line)
            if validate:
                validate_instance(inst)
            yield inst
