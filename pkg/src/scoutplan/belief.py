"""Factored team belief: robot poses plus the unknown/traversable/blocked
PBP partition.

Edge states are independent Bernoullis and observations are perfect, so
the full action-observation history collapses to three disjoint PBP
sets.  Communication is lossless, hence one shared belief for the team.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .graph import BLOCKED, TRAVERSABLE, UNKNOWN, GraphError, WorldGraph

IDLE = -1


class BeliefError(ValueError):
    """Contract violations on belief updates or action queries."""


@dataclass(frozen=True)
class Pose:
    """Either at a node or on an edge at ``offset`` meters from endpoint u.

    ``entry`` records the approach side when standing on the PBP of a
    blocked edge; it is the only legal direction to leave through.
    """
    node: Optional[int] = None
    edge: Optional[int] = None
    offset: float = 0.0
    entry: Optional[int] = None

    @classmethod
    def at_node(cls, node: int, entry: Optional[int] = None) -> "Pose":
        return cls(node=node, entry=entry)

    @classmethod
    def on_edge(cls, edge: int, offset: float) -> "Pose":
        return cls(edge=edge, offset=offset)

    def validate(self, graph: WorldGraph) -> None:
        if (self.node is None) == (self.edge is None):
            raise BeliefError("pose must be at a node or on an edge, not both")
        if self.node is not None:
            if not (0 <= self.node < graph.num_nodes):
                raise BeliefError(f"pose node {self.node} outside graph")
        else:
            if not (0 <= self.edge < graph.num_edges):
                raise BeliefError(f"pose edge {self.edge} outside graph")
            if not (0.0 <= self.offset <= graph.edge_lengths[self.edge]):
                raise BeliefError("pose offset outside edge length")

    def position(self, graph: WorldGraph) -> tuple[float, float]:
        if self.node is not None:
            return graph.node_position(self.node)
        e = graph.edges[self.edge]
        t = self.offset / e.length
        pu = graph.vertex_positions[e.u]
        pv = graph.vertex_positions[e.v]
        return (float(pu[0] + t * (pv[0] - pu[0])),
                float(pu[1] + t * (pv[1] - pu[1])))


@dataclass(frozen=True)
class SingleAction:
    robot: int
    target: int  # node id, or IDLE


@dataclass(frozen=True)
class Observation:
    pbp: int
    status: int  # TRAVERSABLE or BLOCKED
    observer: int
    time: float


class BeliefState:
    """Immutable snapshot; updates return new instances."""

    __slots__ = ("graph", "ugv_poses", "uav_poses", "edge_status",
                 "done_flags", "_unknown_cache")

    def __init__(self, graph: WorldGraph, ugv_poses, uav_poses,
                 edge_status: np.ndarray, done_flags, validate: bool = False):
        self.graph = graph
        self.ugv_poses = tuple(ugv_poses)
        self.uav_poses = tuple((float(x), float(y)) for x, y in uav_poses)
        self.edge_status = np.asarray(edge_status, dtype=np.uint8)
        self.edge_status.setflags(write=False)
        self.done_flags = tuple(bool(d) for d in done_flags)
        self._unknown_cache = None
        if validate:
            if self.edge_status.shape != (graph.num_edges,):
                raise BeliefError("edge status does not cover the graph's edges")
            for p in self.ugv_poses:
                p.validate(graph)

    @classmethod
    def initial(cls, graph: WorldGraph, ugv_starts, uav_positions) -> "BeliefState":
        """Prior belief: deterministic edges start known, the rest unknown."""
        status = np.full(graph.num_edges, UNKNOWN, dtype=np.uint8)
        status[graph.blocking_probs == 0.0] = TRAVERSABLE
        status[graph.blocking_probs == 1.0] = BLOCKED
        poses = [Pose.at_node(s) for s in ugv_starts]
        return cls(graph, poses, uav_positions, status,
                   [False] * len(poses), validate=True)

    # -- PBP partition -----------------------------------------------------
    @property
    def num_ugvs(self) -> int:
        return len(self.ugv_poses)

    @property
    def num_uavs(self) -> int:
        return len(self.uav_poses)

    @property
    def unknown_set(self) -> frozenset[int]:
        return self._status_set(UNKNOWN)

    @property
    def traversable_set(self) -> frozenset[int]:
        return self._status_set(TRAVERSABLE)

    @property
    def blocked_set(self) -> frozenset[int]:
        return self._status_set(BLOCKED)

    def _status_set(self, code: int) -> frozenset[int]:
        nv = self.graph.num_vertices
        return frozenset(int(nv + e) for e in np.flatnonzero(self.edge_status == code))

    def unknown_edges(self) -> np.ndarray:
        if self._unknown_cache is None:
            self._unknown_cache = np.flatnonzero(self.edge_status == UNKNOWN)
        return self._unknown_cache

    def status_of(self, edge_id: int) -> int:
        return int(self.edge_status[edge_id])

    def all_done(self) -> bool:
        return all(self.done_flags)

    # -- updates -----------------------------------------------------------
    def apply_observation(self, obs: Observation) -> "BeliefState":
        edge = self.graph.edge_of_pbp(obs.pbp)
        if self.edge_status[edge] != UNKNOWN:
            raise BeliefError(f"PBP {obs.pbp} was already observed")
        if obs.status not in (TRAVERSABLE, BLOCKED):
            raise BeliefError("observation status must be Traversable or Blocked")
        status = self.edge_status.copy()
        status[edge] = obs.status
        return BeliefState(self.graph, self.ugv_poses, self.uav_poses,
                           status, self.done_flags)

    def with_poses(self, ugv_poses=None, uav_poses=None, done_flags=None) -> "BeliefState":
        return BeliefState(self.graph,
                           self.ugv_poses if ugv_poses is None else ugv_poses,
                           self.uav_poses if uav_poses is None else uav_poses,
                           self.edge_status,
                           self.done_flags if done_flags is None else done_flags)

    def fingerprint(self) -> tuple:
        return (self.ugv_poses, self.uav_poses, self.edge_status.tobytes(),
                self.done_flags)


def legal_actions(belief: BeliefState, robot: int) -> list[SingleAction]:
    """Legal single-robot actions; robots are UGVs first, then UAVs."""
    n = belief.num_ugvs
    if robot < n:
        if belief.done_flags[robot]:
            raise BeliefError(f"UGV {robot} already reached its goal")
        return [SingleAction(robot, t) for t in _ugv_targets(belief, belief.ugv_poses[robot])]
    unknown = belief.unknown_edges()
    if unknown.size == 0:
        return [SingleAction(robot, IDLE)]
    nv = belief.graph.num_vertices
    return [SingleAction(robot, int(nv + e)) for e in unknown]


def _ugv_targets(belief: BeliefState, pose: Pose) -> list[int]:
    g = belief.graph
    status = belief.edge_status
    targets: list[int] = []
    if pose.node is not None:
        if g.is_pbp(pose.node):
            e = g.edges[g.edge_of_pbp(pose.node)]
            st = status[e.id]
            if st == TRAVERSABLE:
                targets = [e.u, e.v]
            elif st == BLOCKED:
                if pose.entry is None:
                    raise BeliefError(
                        "pose at a blocked PBP must record its entry side")
                targets = [pose.entry]
            else:
                raise BeliefError("UGV cannot rest on an unobserved PBP")
        else:
            for eid in g.incident_edges(pose.node):
                e = g.edges[eid]
                st = status[eid]
                if st == UNKNOWN:
                    targets.append(g.pbp_node(eid))
                elif st == TRAVERSABLE:
                    targets.append(e.v if e.u == pose.node else e.u)
                # blocked: neither crossing nor probing gains anything
    else:
        e = g.edges[pose.edge]
        st = status[e.id]
        half = e.length * 0.5
        if pose.offset < half:
            targets.append(e.u)  # behind
            if st == UNKNOWN:
                targets.append(g.pbp_node(e.id))
            elif st == TRAVERSABLE:
                targets.append(e.v)
        elif pose.offset > half:
            targets.append(e.v)  # ahead
            if st == UNKNOWN:
                targets.append(g.pbp_node(e.id))
            elif st == TRAVERSABLE:
                targets.append(e.u)
        elif st == TRAVERSABLE:
            targets = [e.u, e.v]
        else:
            raise BeliefError("midpoint poses on an undecided edge must "
                              "use the PBP node form")
    return sorted(set(targets))
