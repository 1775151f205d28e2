"""Unified graph model: intersections plus per-edge blocking points.

Every edge carries exactly one possible blocking point (PBP) at its
midpoint.  PBPs are real nodes: edge ``e`` between ``u`` and ``v``
expands into two half-edges ``u -- pbp(e)`` and ``pbp(e) -- v``, so
ground robots and drones share one node-addressed action space.  A
blocked edge forbids passage *through* its PBP, but a robot may still
travel from an endpoint to the PBP to look at it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

# Edge status codes, shared across the whole package.
UNKNOWN = 0
TRAVERSABLE = 1
BLOCKED = 2

_LENGTH_RTOL = 1e-6


class GraphError(ValueError):
    """Raised for malformed graphs or mismatched graph/belief arguments."""


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    length: float
    p_block: float


class WorldGraph:
    """Immutable road graph with PBP-expanded adjacency.

    Node ids: vertices are ``0 .. nv-1``; the PBP of edge ``e`` is node
    ``nv + e`` (i.e. ``max_vertex_id + 1 + edge_id``).
    """

    def __init__(self, vertex_positions: Sequence[tuple[float, float]],
                 edges: Sequence[Edge], validate: bool = True):
        self.vertex_positions = np.asarray(vertex_positions, dtype=np.float64)
        if self.vertex_positions.ndim != 2 or self.vertex_positions.shape[1] != 2:
            raise GraphError("vertex positions must be an (nv, 2) array")
        self.edges = tuple(edges)
        self.num_vertices = len(self.vertex_positions)
        self.num_edges = len(self.edges)
        self.num_nodes = self.num_vertices + self.num_edges

        if validate:
            self._validate()

        # Node positions: vertices, then PBPs at edge midpoints.
        pbp_pos = np.empty((self.num_edges, 2), dtype=np.float64)
        for e in self.edges:
            pbp_pos[e.id] = 0.5 * (self.vertex_positions[e.u] + self.vertex_positions[e.v])
        self.node_positions = np.vstack([self.vertex_positions, pbp_pos]) \
            if self.num_edges else self.vertex_positions.copy()

        self.edge_lengths = np.array([e.length for e in self.edges], dtype=np.float64)
        self.blocking_probs = np.array([e.p_block for e in self.edges], dtype=np.float64)

        self._build_expanded_csr()
        self._incident = [[] for _ in range(self.num_vertices)]
        self._edge_by_pair = {}
        for e in self.edges:
            self._incident[e.u].append(e.id)
            self._incident[e.v].append(e.id)
            self._edge_by_pair[(min(e.u, e.v), max(e.u, e.v))] = e.id
        for lst in self._incident:
            lst.sort()

        self.vertex_positions.setflags(write=False)
        self.node_positions.setflags(write=False)
        self.edge_lengths.setflags(write=False)
        self.blocking_probs.setflags(write=False)

    def _validate(self):
        nv = self.num_vertices
        seen = set()
        for i, e in enumerate(self.edges):
            if e.id != i:
                raise GraphError(f"edge ids must be dense and 0-based, got {e.id} at {i}")
            if not (0 <= e.u < nv and 0 <= e.v < nv) or e.u == e.v:
                raise GraphError(f"edge {e.id} has invalid endpoints ({e.u}, {e.v})")
            key = (min(e.u, e.v), max(e.u, e.v))
            if key in seen:
                raise GraphError(f"duplicate edge between {e.u} and {e.v}")
            seen.add(key)
            if not (0.0 <= e.p_block <= 1.0):
                raise GraphError(f"edge {e.id} has p_block outside [0, 1]: {e.p_block}")
            euclid = float(np.linalg.norm(self.vertex_positions[e.u] - self.vertex_positions[e.v]))
            if e.length <= 0.0 or abs(e.length - euclid) > _LENGTH_RTOL * max(euclid, 1.0):
                raise GraphError(
                    f"edge {e.id} length {e.length} disagrees with Euclidean distance {euclid}")
        if self.num_vertices > 1 and not self._connected_all_traversable():
            raise GraphError("graph is not connected under the all-traversable view")

    def _connected_all_traversable(self) -> bool:
        adj = [[] for _ in range(self.num_vertices)]
        for e in self.edges:
            adj[e.u].append(e.v)
            adj[e.v].append(e.u)
        seen = {0}
        stack = [0]
        while stack:
            for m in adj[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return len(seen) == self.num_vertices

    def _build_expanded_csr(self):
        # Arcs over the expanded node set: u <-> pbp(e) <-> v, each half length/2.
        nv = self.num_vertices
        arcs = []  # (src, dst, length, edge_id)
        for e in self.edges:
            b = nv + e.id
            half = e.length * 0.5
            arcs.append((e.u, b, half, e.id))
            arcs.append((b, e.u, half, e.id))
            arcs.append((b, e.v, half, e.id))
            arcs.append((e.v, b, half, e.id))
        arcs.sort()
        n = self.num_nodes
        self.csr_indptr = np.zeros(n + 1, dtype=np.int64)
        self.csr_to = np.empty(len(arcs), dtype=np.int64)
        self.csr_len = np.empty(len(arcs), dtype=np.float64)
        self.csr_edge = np.empty(len(arcs), dtype=np.int64)
        for i, (s, d, ln, eid) in enumerate(arcs):
            self.csr_indptr[s + 1] += 1
            self.csr_to[i] = d
            self.csr_len[i] = ln
            self.csr_edge[i] = eid
        np.cumsum(self.csr_indptr, out=self.csr_indptr)
        for a in (self.csr_indptr, self.csr_to, self.csr_len, self.csr_edge):
            a.setflags(write=False)

    # -- node helpers ------------------------------------------------------
    def pbp_node(self, edge_id: int) -> int:
        return self.num_vertices + edge_id

    def is_pbp(self, node: int) -> bool:
        return node >= self.num_vertices

    def edge_of_pbp(self, node: int) -> int:
        if not self.is_pbp(node):
            raise GraphError(f"node {node} is not a PBP")
        return node - self.num_vertices

    def incident_edges(self, vertex: int) -> list[int]:
        return list(self._incident[vertex])

    def edge_between(self, a: int, b: int) -> int:
        try:
            return self._edge_by_pair[(min(a, b), max(a, b))]
        except KeyError:
            raise GraphError(f"no edge between vertices {a} and {b}") from None

    def node_position(self, node: int) -> tuple[float, float]:
        x, y = self.node_positions[node]
        return (float(x), float(y))

    def total_edge_length(self) -> float:
        return float(self.edge_lengths.sum())

    # -- serialization -----------------------------------------------------
    def to_json_dict(self) -> dict:
        return {
            "vertices": [
                {"id": i, "x": float(p[0]), "y": float(p[1])}
                for i, p in enumerate(self.vertex_positions)
            ],
            "edges": [
                {"id": e.id, "u": e.u, "v": e.v,
                 "length": float(e.length), "p_block": float(e.p_block)}
                for e in self.edges
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "WorldGraph":
        verts = sorted(data["vertices"], key=lambda r: r["id"])
        for i, r in enumerate(verts):
            if r["id"] != i:
                raise GraphError("vertex ids must be dense and 0-based")
        positions = [(float(r["x"]), float(r["y"])) for r in verts]
        edges = [
            Edge(id=int(r["id"]), u=int(r["u"]), v=int(r["v"]),
                 length=float(r["length"]), p_block=float(r["p_block"]))
            for r in sorted(data["edges"], key=lambda r: r["id"])
        ]
        return cls(positions, edges)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "WorldGraph":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def __eq__(self, other):
        return (isinstance(other, WorldGraph)
                and np.array_equal(self.vertex_positions, other.vertex_positions)
                and self.edges == other.edges)

    def __hash__(self):
        return hash((self.num_vertices, self.edges))


class WorldSample:
    """One full realization of all edge statuses for a source graph."""

    def __init__(self, graph: WorldGraph, edge_status: np.ndarray):
        edge_status = np.asarray(edge_status, dtype=np.uint8)
        if edge_status.shape != (graph.num_edges,):
            raise GraphError("sample does not cover the edge set of its graph")
        if np.any((edge_status != TRAVERSABLE) & (edge_status != BLOCKED)):
            raise GraphError("sample statuses must be Traversable or Blocked")
        self.graph = graph
        self.edge_status = edge_status
        self.edge_status.setflags(write=False)

    def status(self, edge_id: int) -> int:
        return int(self.edge_status[edge_id])

    def is_blocked(self, edge_id: int) -> bool:
        return self.edge_status[edge_id] == BLOCKED


def sample_world(graph: WorldGraph, belief, rng_seed: int) -> WorldSample:
    """Realize every unknown edge independently with its blocking probability.

    Observed edges copy the belief's status.  Deterministic per seed.
    """
    if belief.graph is not graph and belief.graph != graph:
        raise GraphError("belief refers to a different graph")
    rng = np.random.default_rng(rng_seed)
    u = rng.random(graph.num_edges)
    status = belief.edge_status.astype(np.uint8).copy()
    unknown = status == UNKNOWN
    status[unknown] = np.where(u[unknown] < graph.blocking_probs[unknown],
                               BLOCKED, TRAVERSABLE)
    return WorldSample(graph, status)


class GraphView:
    """Per-edge passability used by shortest-path queries.

    A view never marks an edge passable that the conditioning belief
    already observed as blocked.
    """

    def __init__(self, graph: WorldGraph, passable: np.ndarray, label: str):
        self.graph = graph
        self.passable = np.asarray(passable, dtype=np.uint8)
        self.label = label
        self.passable.setflags(write=False)

    @classmethod
    def optimistic(cls, graph: WorldGraph, belief=None) -> "GraphView":
        if belief is None:
            passable = np.ones(graph.num_edges, dtype=np.uint8)
        else:
            passable = (belief.edge_status != BLOCKED).astype(np.uint8)
        return cls(graph, passable, "optimistic")

    @classmethod
    def pessimistic(cls, graph: WorldGraph, belief=None) -> "GraphView":
        if belief is None:
            passable = np.zeros(graph.num_edges, dtype=np.uint8)
        else:
            passable = (belief.edge_status == TRAVERSABLE).astype(np.uint8)
        return cls(graph, passable, "pessimistic")

    @classmethod
    def realized(cls, sample: WorldSample, belief=None) -> "GraphView":
        if belief is not None:
            observed = belief.edge_status != UNKNOWN
            if np.any(sample.edge_status[observed] != belief.edge_status[observed]):
                raise GraphError("world sample disagrees with observed belief statuses")
        return cls(sample.graph, (sample.edge_status == TRAVERSABLE).astype(np.uint8),
                   "realized")


def pose_seeds(graph: WorldGraph, pose) -> list[tuple[int, float]]:
    """Expanded-graph anchors reachable from a pose, with entry costs.

    Used to start Dijkstra from arbitrary on-edge positions.  A robot
    standing at the PBP of a blocked edge may only leave toward its
    entry side.
    """
    if pose.node is not None:
        return [(pose.node, 0.0)]
    e = graph.edges[pose.edge]
    half = e.length * 0.5
    x = pose.offset
    b = graph.pbp_node(e.id)
    if x < half:
        return [(e.u, x), (b, half - x)]
    if x > half:
        return [(b, x - half), (e.v, e.length - x)]
    return [(e.u, half), (e.v, half)]


def dijkstra_python(graph: WorldGraph, passable: np.ndarray,
                    seeds: Iterable[tuple[int, float]],
                    blocked_entry: Optional[int] = None):
    """Reference Dijkstra over the expanded graph, with predecessors.

    ``passable[e] == 0`` makes the PBP of ``e`` a sink: paths may end
    there but not continue through it.  ``blocked_entry`` restricts a
    source sitting on a blocked PBP to leave toward that node only.
    """
    import heapq

    n = graph.num_nodes
    nv = graph.num_vertices
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    heap = []
    for node, d0 in seeds:
        if d0 < dist[node]:
            dist[node] = d0
            heapq.heappush(heap, (d0, node))
    first = True
    while heap:
        d, s = heapq.heappop(heap)
        if d > dist[s]:
            continue
        source_restricted = first and blocked_entry is not None and d == 0.0
        first = False
        if s >= nv and not passable[s - nv] and not source_restricted:
            continue  # blocked PBP: arrivals only
        for i in range(graph.csr_indptr[s], graph.csr_indptr[s + 1]):
            m = int(graph.csr_to[i])
            if source_restricted and m != blocked_entry:
                continue
            nd = d + graph.csr_len[i]
            if nd < dist[m] - 1e-12:
                dist[m] = nd
                pred[m] = s
                heapq.heappush(heap, (nd, m))
    return dist, pred


def shortest_path(graph: WorldGraph, view: GraphView, from_pose,
                  to_node: int) -> Optional[tuple[float, list[int]]]:
    """Minimal-length path under a view, or None when unreachable.

    Paths list expanded nodes, so traversing a full edge reads
    ``[u, pbp, v]``.  An on-edge start contributes its first partial
    segment to the cost but no extra node.
    """
    if from_pose.node is not None and from_pose.node == to_node:
        return (0.0, [to_node])
    entry = getattr(from_pose, "entry", None)
    if from_pose.node is not None and graph.is_pbp(from_pose.node):
        e = graph.edge_of_pbp(from_pose.node)
        if not view.passable[e] and entry is not None:
            dist, pred = _dijkstra_from_restricted(graph, view.passable,
                                                   from_pose.node, entry)
            return _extract(graph, dist, pred, to_node)
    seeds = pose_seeds(graph, from_pose)
    dist, pred = dijkstra_python(graph, view.passable, seeds)
    return _extract(graph, dist, pred, to_node)


def _dijkstra_from_restricted(graph, passable, source, entry):
    return dijkstra_python(graph, passable, [(source, 0.0)], blocked_entry=entry)


def _extract(graph, dist, pred, to_node):
    if not np.isfinite(dist[to_node]):
        return None
    path = [to_node]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return (float(dist[to_node]), path)
