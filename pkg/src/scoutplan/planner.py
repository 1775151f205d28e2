"""Joint-action POMCP planner for scout-assisted navigation.

A joint action assigns each live robot one target node.  Its duration
is the earliest single-robot completion; at that moment every robot is
interrupted (possibly mid-edge) and reassigned.  If the finisher lands
on an unobserved PBP the belief branches on the revealed status.  With
zero drones this degenerates to the classic replanning baseline.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _fast, pruning
from .belief import (IDLE, BeliefState, Observation, Pose, SingleAction,
                     _ugv_targets)
from .graph import (BLOCKED, TRAVERSABLE, UNKNOWN, GraphError, GraphView,
                    WorldGraph, WorldSample, sample_world, shortest_path)

_EPS = 1e-9


class PlannerError(RuntimeError):
    pass


@dataclass(frozen=True)
class JointAction:
    actions: tuple[SingleAction, ...]

    @property
    def targets(self) -> tuple[int, ...]:
        return tuple(a.target for a in self.actions)


@dataclass(frozen=True)
class Branch:
    kind: str  # "blocked" | "traversable" | "none"
    prob: float


@dataclass
class TransitionOutcome:
    elapsed: float
    finisher: SingleAction
    next_belief: BeliefState
    branch: Branch
    ugv_cost_delta: float
    observations: tuple[Observation, ...]


@dataclass
class PruningConfig:
    strategy: str = "none"  # none | dap | iap | liap
    k: int = 1
    oracle: pruning.OracleConfig = field(default_factory=pruning.OracleConfig)
    predictor: Optional[pruning.PredictorClient] = None


@dataclass
class PlannerConfig:
    rollouts: int = 1000
    max_tree_depth: int = 40
    ucb_constant: Optional[float] = None  # None: 0.5 x optimistic SP cost
    pruning: PruningConfig = field(default_factory=PruningConfig)
    seed: int = 0

    def __post_init__(self):
        if self.rollouts < 1:
            raise ValueError("rollouts must be >= 1")
        if self.pruning.k < 1:
            raise ValueError("top-K must be >= 1")


# ---------------------------------------------------------------------------
# Transition model
# ---------------------------------------------------------------------------

def _hop_params(graph: WorldGraph, pose: Pose, target: int):
    """Distance and straight-line motion parameters for one UGV hop.

    Returns (edge_id, start_offset, direction, distance, arrival_pose).
    """
    nv = graph.num_vertices
    if target >= nv:  # hop onto a PBP
        e = graph.edges[target - nv]
        half = e.length * 0.5
        if pose.node is not None:
            if pose.node not in (e.u, e.v):
                raise PlannerError(f"node {pose.node} is not an endpoint of edge {e.id}")
            if pose.node == e.u:
                return e.id, 0.0, 1.0, half, Pose(node=target, entry=e.u)
            return e.id, e.length, -1.0, half, Pose(node=target, entry=e.v)
        if pose.edge != e.id:
            raise PlannerError("on-edge pose targets a PBP of a different edge")
        if pose.offset < half:
            return e.id, pose.offset, 1.0, half - pose.offset, Pose(node=target, entry=e.u)
        return e.id, pose.offset, -1.0, pose.offset - half, Pose(node=target, entry=e.v)
    # hop onto a vertex
    if pose.node is not None and graph.is_pbp(pose.node):
        e = graph.edges[graph.edge_of_pbp(pose.node)]
        half = e.length * 0.5
        if target == e.v:
            return e.id, half, 1.0, half, Pose(node=target)
        if target == e.u:
            return e.id, half, -1.0, half, Pose(node=target)
        raise PlannerError("PBP pose targets a non-endpoint vertex")
    if pose.node is not None:
        eid = graph.edge_between(pose.node, target)
        e = graph.edges[eid]
        if pose.node == e.u:
            return e.id, 0.0, 1.0, e.length, Pose(node=target)
        return e.id, e.length, -1.0, e.length, Pose(node=target)
    e = graph.edges[pose.edge]
    if target == e.u:
        return e.id, pose.offset, -1.0, pose.offset, Pose(node=target)
    if target == e.v:
        return e.id, pose.offset, 1.0, e.length - pose.offset, Pose(node=target)
    raise PlannerError("on-edge pose targets a vertex off its edge")


def _advance_raw(belief: BeliefState, targets, world_status: np.ndarray, team):
    """Core transition on raw target tuples; world is a status array."""
    g = belief.graph
    n = belief.num_ugvs
    active = [i for i in range(n) if not belief.done_flags[i]]
    uavs = list(range(n, n + belief.num_uavs))
    if len(targets) != len(active) + len(uavs):
        raise PlannerError("joint action arity does not match live robots")

    hops = {}
    times = []
    robots = []
    for k, i in enumerate(active):
        params = _hop_params(g, belief.ugv_poses[i], targets[k])
        hops[i] = params
        times.append(params[3] / team.ugv_speed)
        robots.append(i)
    uav_moves = {}
    for k, j in enumerate(uavs):
        t = targets[len(active) + k]
        if t == IDLE:
            times.append(math.inf)
        else:
            px, py = belief.uav_poses[j - n]
            bx, by = g.node_position(t)
            d = math.hypot(px - bx, py - by)
            uav_moves[j] = (d, (bx, by))
            times.append(d / team.uav_speed)
        robots.append(j)

    t_star = min(times)
    if not math.isfinite(t_star):
        raise PlannerError("joint action has no finite completion time")
    finisher_idx = times.index(t_star)  # lowest robot id wins ties
    finisher = SingleAction(robots[finisher_idx], targets[finisher_idx])

    new_ugv = list(belief.ugv_poses)
    new_done = list(belief.done_flags)
    cost = 0.0
    arrivals = []  # (robot, target)
    for k, i in enumerate(active):
        eid, off, direction, dist, arrival = hops[i]
        move = team.ugv_speed * t_star
        if move >= dist - _EPS:
            new_ugv[i] = arrival
            cost += dist
            arrivals.append((i, targets[k]))
        else:
            new_ugv[i] = Pose.on_edge(eid, off + direction * move)
            cost += move
    new_uav = list(belief.uav_poses)
    for k, j in enumerate(uavs):
        t = targets[len(active) + k]
        if t == IDLE:
            continue
        d, (bx, by) = uav_moves[j]
        move = team.uav_speed * t_star
        if move >= d - _EPS * max(d, 1.0):
            new_uav[j - n] = (bx, by)
            arrivals.append((j, t))
        else:
            px, py = belief.uav_poses[j - n]
            f = move / d
            new_uav[j - n] = (px + f * (bx - px), py + f * (by - py))

    # Goal arrivals are processed before observations.
    for i, t in arrivals:
        if i < n and t == team.goals[i]:
            new_done[i] = True

    status = belief.edge_status
    new_status = None
    observations = []
    branch = Branch("none", 1.0)
    nv = g.num_vertices
    order = sorted(arrivals, key=lambda rt: (rt[0] != finisher.robot, rt[0]))
    for rob, t in order:
        if t < nv:
            continue
        e = t - nv
        cur = status[e] if new_status is None else new_status[e]
        if cur != UNKNOWN:
            continue
        if new_status is None:
            new_status = status.copy()
        st = int(world_status[e])
        new_status[e] = st
        observations.append(Observation(pbp=t, status=st, observer=rob, time=t_star))
        if rob == finisher.robot:
            p = float(g.blocking_probs[e])
            branch = Branch("blocked", p) if st == BLOCKED \
                else Branch("traversable", 1.0 - p)

    next_belief = BeliefState(g, new_ugv, new_uav,
                              status if new_status is None else new_status,
                              new_done)
    return TransitionOutcome(
        elapsed=t_star, finisher=finisher, next_belief=next_belief,
        branch=branch, ugv_cost_delta=cost,
        observations=tuple(observations))


def advance(belief: BeliefState, joint: JointAction, world: WorldSample,
            team) -> TransitionOutcome:
    """Advance every robot until the first one completes its action."""
    if world.graph is not belief.graph and world.graph != belief.graph:
        raise GraphError("world sample belongs to a different graph")
    observed = belief.edge_status != UNKNOWN
    if np.any(world.edge_status[observed] != belief.edge_status[observed]):
        raise GraphError("world sample contradicts observed belief statuses")
    return _advance_raw(belief, joint.targets, world.edge_status, team)


# ---------------------------------------------------------------------------
# Drone candidate tables
# ---------------------------------------------------------------------------

class _ScoreTable:
    """Per-drone ranked PBP candidates, frozen at the decision step."""

    def __init__(self, strategy: str, k: int, ranked: Optional[dict[int, list[int]]]):
        self.strategy = strategy
        self.k = k
        self.ranked = ranked  # None for strategy "none"

    def drone_options(self, belief: BeliefState) -> dict[int, list[int]]:
        n = belief.num_ugvs
        drones = list(range(n, n + belief.num_uavs))
        nv = belief.graph.num_vertices
        unknown = {int(nv + e) for e in belief.unknown_edges()}
        if not unknown:
            return {d: [IDLE] for d in drones}
        if self.ranked is None:
            ordered = sorted(unknown)
            return {d: ordered for d in drones}
        claimed: set[int] = set()
        out = {}
        for d in drones:
            picks = []
            for pbp in self.ranked[d]:
                if pbp in unknown and pbp not in claimed:
                    picks.append(pbp)
                    claimed.add(pbp)
                    if len(picks) == self.k:
                        break
            out[d] = picks if picks else [IDLE]
        return out


def _build_score_table(belief: BeliefState, team, config: PlannerConfig,
                       info: dict) -> _ScoreTable:
    pr = config.pruning
    if belief.num_uavs == 0 or pr.strategy == "none":
        return _ScoreTable("none", pr.k, None)
    n = belief.num_ugvs
    live = [i for i in range(n) if not belief.done_flags[i]]
    drones = list(range(n, n + belief.num_uavs))
    unknown_pbps = [belief.graph.pbp_node(int(e)) for e in belief.unknown_edges()]
    if not unknown_pbps:
        return _ScoreTable(pr.strategy, pr.k, {d: [] for d in drones})

    strategy = pr.strategy
    vc = None
    if strategy in ("iap", "liap"):
        vc = _team_value_change(belief, team, live, config, info)
        if vc is None:  # predictor failure: fall back to distance scores
            strategy = "dap"
            info["liap_fallback"] = info.get("liap_fallback", 0) + 1

    ranked = {}
    for d in drones:
        if strategy == "dap":
            scores = [pruning.dap_score(belief, d, b, live) for b in unknown_pbps]
        else:
            scores = [pruning.iap_priority(belief, d, b,
                                           lambda i, e: vc[i][e],
                                           team.uav_speed, live)
                      for b in unknown_pbps]
        ranked[d] = pruning.rank_candidates(scores)
    return _ScoreTable(pr.strategy, pr.k, ranked)


def _team_value_change(belief, team, live, config, info):
    """Per-robot per-edge value change, from the oracle or the predictor."""
    pr = config.pruning
    out = {}
    for i in live:
        if pr.strategy == "iap":
            seed = int(np.random.SeedSequence(
                [config.seed & 0xFFFFFFFFFFFFFFFF, 0xAB, i]).generate_state(1)[0])
            oracle = replace(pr.oracle, seed=seed)
            vc, _ = pruning.value_change_table(
                belief.graph, belief, belief.ugv_poses[i], team.goals[i], oracle)
            out[i] = vc
        else:
            try:
                pred = pr.predictor.query(belief, i, team.goals[i])
            except pruning.PredictorError as exc:
                pruning.log.warning("predictor failed, falling back to DAP: %s", exc)
                return None
            arr = np.zeros(belief.graph.num_edges)
            for eid, v in pred.items():
                arr[eid] = max(0.0, v)
            out[i] = arr
    return out


# ---------------------------------------------------------------------------
# POMCP search
# ---------------------------------------------------------------------------

class _Node:
    """One belief node of the search tree.

    ``children`` maps a joint target tuple to mutable stats
    ``[n, mean_cost, branches]`` where ``mean_cost`` is the arithmetic
    mean of every total cost backed up through the action and
    ``branches`` maps observation keys to the child node (or None while
    the branch is still rollout-only).  ``value`` caches min over tried
    actions of ``mean_cost``.
    """

    __slots__ = ("visits", "options", "sizes", "total", "cursor", "children",
                 "value")

    def __init__(self, belief: BeliefState, table: _ScoreTable,
                 banned: Optional[dict[int, int]] = None):
        n = belief.num_ugvs
        opts = []
        for i in range(n):
            if not belief.done_flags[i]:
                targets = _ugv_targets(belief, belief.ugv_poses[i])
                if banned is not None and i in banned:
                    kept = [t for t in targets if t != banned[i]]
                    if kept:
                        targets = kept
                opts.append(targets)
        drone_opts = table.drone_options(belief)
        for d in sorted(drone_opts):
            opts.append(drone_opts[d])
        self.options = opts
        self.sizes = [len(o) for o in opts]
        self.total = 1
        for s in self.sizes:
            self.total *= s
        self.cursor = 0
        self.visits = 0
        self.children: dict[tuple, list] = {}
        self.value = math.inf

    def decode(self, index: int) -> tuple:
        out = []
        for o, s in zip(self.options, self.sizes):
            out.append(o[index % s])
            index //= s
        return tuple(out)

    def _valid(self, cand: tuple, num_drones: int) -> bool:
        if num_drones < 2:
            return True
        tail = [t for t in cand[len(cand) - num_drones:] if t != IDLE]
        return len(tail) == len(set(tail))

    def next_untried(self, num_drones: int):
        while self.cursor < self.total:
            cand = self.decode(self.cursor)
            self.cursor += 1
            if self._valid(cand, num_drones) and cand not in self.children:
                return cand
        return None


class _Search:
    def __init__(self, belief: BeliefState, team, config: PlannerConfig,
                 table: _ScoreTable):
        self.team = team
        self.config = config
        self.table = table
        self.graph = belief.graph
        self.num_drones = belief.num_uavs
        self.penalty = 2.0 * self.graph.total_edge_length()
        self.root = _Node(belief, table)
        self.root_belief = belief
        self.ucb_c = config.ucb_constant
        if self.ucb_c is None:
            self.ucb_c = 0.5 * self._optimistic_cost(belief)

    def _optimistic_cost(self, belief: BeliefState) -> float:
        total = 0.0
        view = GraphView.optimistic(self.graph, belief)
        for i in range(belief.num_ugvs):
            if belief.done_flags[i]:
                continue
            res = shortest_path(self.graph, view, belief.ugv_poses[i],
                                self.team.goals[i])
            total += res[0] if res else self.penalty
        return total

    def run(self, rollouts: int, seed: int) -> None:
        rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF]))
        g = self.graph
        base = self.root_belief.edge_status
        unknown = np.flatnonzero(base == UNKNOWN)
        p = g.blocking_probs[unknown]
        self._anchors = self._solvability_anchors(self.root_belief)
        self._repair_routes = None
        # Root warm-up: every root action gets a minimum number of
        # evaluations before pure UCB takes over, since with the
        # cost-scaled exploration constant one unlucky first sample can
        # otherwise starve the optimal action permanently.  The floor is
        # budget-capped, so an unpruned candidate explosion still
        # dilutes per-action accuracy instead of being bailed out.
        floor = max(1, min(64, rollouts // (2 * max(1, self.root.total))))
        for r in range(rollouts):
            world = self._sample_world(rng, base, unknown, p)
            cand = self.root.next_untried(self.num_drones)
            if cand is None:
                under = [(s[0], c) for c, s in self.root.children.items()
                         if s[0] < floor]
                if under:
                    cand = min(under)[1]
            self._simulate(self.root, self.root_belief, world, 0, cand)

    def _solvability_anchors(self, belief: BeliefState) -> list[tuple[int, int]]:
        """(vertex, goal) per live UGV for conditioning sampled worlds.

        The vertex is one the robot can certainly reach (behind any
        unobserved midpoint), so a world is usable iff each goal stays
        connected to it.
        """
        g = self.graph
        anchors = []
        for i in range(belief.num_ugvs):
            if belief.done_flags[i]:
                continue
            pose = belief.ugv_poses[i]
            if pose.node is not None:
                node = pose.node
                if g.is_pbp(node) and belief.edge_status[g.edge_of_pbp(node)] == BLOCKED:
                    node = pose.entry
            else:
                e = g.edges[pose.edge]
                node = e.u if pose.offset <= e.length * 0.5 else e.v
            anchors.append((int(node), int(self.team.goals[i])))
        return anchors

    def _world_solvable(self, world: np.ndarray) -> bool:
        """Whether every live robot can still reach its goal in this
        realization."""
        g = self.graph
        passable = (world != BLOCKED).astype(np.uint8)
        dist = np.empty(g.num_nodes)
        pred = np.empty(g.num_nodes, dtype=np.int64)
        for node, goal in self._anchors:
            _fast.dijkstra(g.csr_indptr, g.csr_to, g.csr_len,
                           g.num_vertices, passable,
                           np.array([goal], dtype=np.int64),
                           np.zeros(1), dist, pred)
            if not math.isfinite(float(dist[node])):
                return False
        return True

    def _optimistic_route_edges(self) -> list[np.ndarray]:
        """Edge ids along a belief-optimistic anchor-goal route, one list
        per live robot; used to repair rare unsolvable world draws."""
        g = self.graph
        passable = (self.root_belief.edge_status != BLOCKED).astype(np.uint8)
        dist = np.empty(g.num_nodes)
        pred = np.empty(g.num_nodes, dtype=np.int64)
        routes = []
        for node, goal in self._anchors:
            _fast.dijkstra(g.csr_indptr, g.csr_to, g.csr_len,
                           g.num_vertices, passable,
                           np.array([goal], dtype=np.int64),
                           np.zeros(1), dist, pred)
            eids = []
            cur = node
            while cur != goal and math.isfinite(float(dist[cur])):
                nxt = int(pred[cur])
                pbp = cur if g.is_pbp(cur) else nxt
                if g.is_pbp(pbp):
                    eids.append(g.edge_of_pbp(pbp))
                cur = nxt
            routes.append(np.unique(np.array(eids, dtype=np.int64)))
        return routes

    def _sample_world(self, rng, base, unknown, p) -> np.ndarray:
        """Draw a realization in which every live robot can still reach
        its goal, mirroring how episode ground-truth worlds are drawn.
        Unconditioned draws would charge phantom disconnection penalties
        to whichever subtrees happened to sample them.

        Heavily constrained beliefs can make acceptance rare, so after a
        bounded number of tries the draw is repaired instead: the edges
        of an optimistic anchor-goal route are forced open, which keeps
        the world solvable at the price of a small bias on that route.
        """
        world = base.copy()
        for _ in range(32):
            if unknown.size:
                world[unknown] = np.where(rng.random(unknown.size) < p,
                                          BLOCKED, TRAVERSABLE)
            if self._world_solvable(world) or not unknown.size:
                return world
        if self._repair_routes is None:
            self._repair_routes = self._optimistic_route_edges()
        for eids in self._repair_routes:
            if eids.size:
                world[eids] = TRAVERSABLE
        return world

    def _simulate(self, node: _Node, belief: BeliefState,
                  world: np.ndarray, depth: int, force_cand=None) -> float:
        """One selection/expansion/rollout pass; returns the total UGV
        cost of the pass so ancestors can fold it into their running
        means.  ``force_cand`` overrides the root action choice for
        paired-world evaluation."""
        if node.total == 0:
            # A ground robot is walled in by observed blockages; the
            # rollout charges the disconnection penalty.
            node.visits += 1
            return self._rollout(belief, world)
        cand = force_cand
        if cand is None:
            cand = node.next_untried(self.num_drones)
        if cand is None:
            cand = self._select_ucb(node)
        out = _advance_raw(belief, cand, world, self.team)
        stats = node.children.get(cand)
        if stats is None:
            stats = [0, 0.0, {}]
            node.children[cand] = stats
        obs_key = tuple((o.pbp, o.status) for o in out.observations)
        nxt = out.next_belief
        if obs_key not in stats[2]:
            # First pass through this outcome: leave it rollout-only and
            # grow the tree by at most one node per simulation.
            stats[2][obs_key] = None
            r = self._rollout(nxt, world)
        else:
            child = stats[2][obs_key]
            if (child is None and not nxt.all_done()
                    and depth + 1 < self.config.max_tree_depth):
                child = _Node(nxt, self.table,
                              self._reversal_bans(belief, out))
                stats[2][obs_key] = child
            if child is not None:
                r = self._simulate(child, nxt, world, depth + 1)
            else:
                r = self._rollout(nxt, world)
        total_cost = out.ugv_cost_delta + r
        stats[0] += 1
        stats[1] += (total_cost - stats[1]) / stats[0]
        node.visits += 1
        node.value = min(s[1] for s in node.children.values())
        return total_cost

    @staticmethod
    def _reversal_bans(belief: BeliefState, out: TransitionOutcome):
        """Immediate node-to-node reversals to exclude from the child's
        candidate set.  When a hop reveals nothing, walking straight
        back re-creates a belief the robot already held at the previous
        decision point minus the round-trip cost, so the move is
        dominated and only feeds noise into the action means."""
        if out.observations:
            return None
        banned = {}
        nxt = out.next_belief
        for i in range(nxt.num_ugvs):
            if nxt.done_flags[i]:
                continue
            prev, cur = belief.ugv_poses[i], nxt.ugv_poses[i]
            if (prev.node is not None and cur.node is not None
                    and prev.node != cur.node):
                banned[i] = prev.node
        return banned or None

    def _select_ucb(self, node: _Node):
        log_n = math.log(max(node.visits, 1))
        best = None
        best_score = math.inf
        for cand, stats in node.children.items():
            score = stats[1] - self.ucb_c * math.sqrt(log_n / stats[0])
            if score < best_score - 1e-12:
                best_score = score
                best = cand
        return best

    def _rollout(self, belief: BeliefState, world: np.ndarray) -> float:
        if belief.all_done():
            return 0.0
        g = self.graph
        world_blocked = (world == BLOCKED).astype(np.uint8)
        total = 0.0
        for i in range(belief.num_ugvs):
            if belief.done_flags[i]:
                continue
            pose = belief.ugv_poses[i]
            seeds, entry = _rollout_seeds(g, belief, pose)
            total += _fast.optimistic_nav_cost(
                g.csr_indptr, g.csr_to, g.csr_len, g.num_vertices,
                g.edge_lengths, belief.edge_status.copy(), world_blocked,
                seeds[0], seeds[1], entry, self.team.goals[i], self.penalty)
        return total

    def best_action(self, prefer: Optional[dict[int, int]] = None,
                    avoid: Optional[dict[int, int]] = None):
        """Lowest-mean root action with motion hysteresis: a candidate
        that keeps a moving UGV on its heading gets a small bonus, one
        that sends a UGV straight back to the node it just left gets the
        same amount as a penalty.  Without it, interruption-dense
        episodes re-decide near-tied estimates every few meters and the
        noise walks the robot back and forth over the same ground; a
        genuinely information-driven turnaround clears the margin."""
        margin = 0.10 * self.ucb_c  # ucb_c is the cost-scale proxy
        best = None
        best_key = (math.inf, 0)
        for cand in sorted(self.root.children):
            stats = self.root.children[cand]
            if stats[0] == 0:
                continue
            score = stats[1]
            if prefer and all(cand[k] == t for k, t in prefer.items()):
                score -= margin
            if avoid and any(cand[k] == t for k, t in avoid.items()):
                score += margin
            if score < best_key[0] - 1e-12:
                best_key = (score, stats[1])
                best = cand
        return best, best_key[1]


def _rollout_seeds(graph: WorldGraph, belief: BeliefState, pose: Pose):
    entry = -1
    if pose.node is not None:
        if graph.is_pbp(pose.node):
            e = graph.edge_of_pbp(pose.node)
            if belief.edge_status[e] == BLOCKED:
                nodes = np.array([pose.entry], dtype=np.int64)
                dists = np.array([graph.edge_lengths[e] * 0.5], dtype=np.float64)
                return (nodes, dists), entry
        nodes = np.array([pose.node], dtype=np.int64)
        dists = np.zeros(1, dtype=np.float64)
        return (nodes, dists), entry
    e = graph.edges[pose.edge]
    half = e.length * 0.5
    x = pose.offset
    b = graph.pbp_node(e.id)
    if x < half:
        nodes = np.array([e.u, b], dtype=np.int64)
        dists = np.array([x, half - x], dtype=np.float64)
        entry = e.u
    elif x > half:
        nodes = np.array([b, e.v], dtype=np.int64)
        dists = np.array([x - half, e.length - x], dtype=np.float64)
        entry = e.v
    else:
        nodes = np.array([e.u, e.v], dtype=np.int64)
        dists = np.array([half, half], dtype=np.float64)
    return (nodes, dists), entry


def plan_step(belief: BeliefState, team, config: PlannerConfig,
              prefer: Optional[dict[int, int]] = None,
              avoid: Optional[dict[int, int]] = None):
    """One POMCP decision: returns (JointAction, info dict).

    ``prefer`` maps a live-robot position in the joint tuple to the
    target that robot is already moving toward, ``avoid`` to the node it
    just left; best_action applies motion hysteresis to both.
    """
    n = belief.num_ugvs
    live = [i for i in range(n) if not belief.done_flags[i]]
    if not live:
        raise PlannerError("no live ground robots to plan for")
    info: dict = {}
    t0 = time.perf_counter()
    table = _build_score_table(belief, team, config, info)
    info["ap_time"] = time.perf_counter() - t0

    search = _Search(belief, team, config, table)
    search.run(config.rollouts, config.seed)
    cand, value = search.best_action(prefer, avoid)
    if cand is None:
        raise PlannerError("search produced no candidate joint action")
    robots = live + list(range(n, n + belief.num_uavs))
    joint = JointAction(tuple(SingleAction(r, t) for r, t in zip(robots, cand)))
    info["root_value"] = value
    info["root_children"] = len(search.root.children)
    info["ucb_constant"] = search.ucb_c
    return joint, info


# ---------------------------------------------------------------------------
# Episodes
# ---------------------------------------------------------------------------

@dataclass
class EpisodeResult:
    total_ugv_distance: float
    num_decision_steps: int
    plan_times: list[float]
    ap_times: list[float]
    trace: list[dict]
    incomplete: bool
    world_status: np.ndarray


def sample_solvable_world(graph: WorldGraph, belief: BeliefState, team,
                          world_seed: int, max_tries: int = 1000) -> WorldSample:
    """First derived world in which every UGV can reach its goal."""
    for t in range(max_tries):
        seed = int(np.random.SeedSequence(
            [world_seed & 0xFFFFFFFFFFFFFFFF, t]).generate_state(1)[0])
        world = sample_world(graph, belief, seed)
        view = GraphView.realized(world, belief)
        ok = all(
            shortest_path(graph, view, belief.ugv_poses[i], team.goals[i]) is not None
            for i in range(belief.num_ugvs))
        if ok:
            return world
    raise PlannerError(f"no solvable world found in {max_tries} tries")


def run_episode(graph: WorldGraph, team, config: PlannerConfig,
                world_seed: int, step_cap: int = 200,
                require_solvable: bool = True) -> EpisodeResult:
    belief = BeliefState.initial(graph, team.starts, team.uav_starts)
    if require_solvable:
        world = sample_solvable_world(graph, belief, team, world_seed)
    else:
        world = sample_world(graph, belief, world_seed)

    total = 0.0
    plan_times: list[float] = []
    ap_times: list[float] = []
    trace: list[dict] = []
    steps = 0
    # Motion-hysteresis memory per UGV: the target it is moving toward
    # (kept while mid-edge) and the node it most recently left (avoided
    # while standing at a node), so near-tied re-decisions do not walk
    # the robot back and forth.
    last_targets: dict[int, int] = {}
    last_node: dict[int, int] = {i: p.node for i, p in enumerate(belief.ugv_poses)
                                 if p.node is not None}
    came_from: dict[int, int] = {}
    while not belief.all_done() and steps < step_cap:
        n = belief.num_ugvs
        live = [i for i in range(n) if not belief.done_flags[i]]
        prefer = {k: last_targets[i] for k, i in enumerate(live)
                  if belief.ugv_poses[i].edge is not None and i in last_targets}
        avoid = {k: came_from[i] for k, i in enumerate(live)
                 if belief.ugv_poses[i].node is not None and i in came_from}
        step_seed = int(np.random.SeedSequence(
            [config.seed & 0xFFFFFFFFFFFFFFFF, 0x57E9, steps]).generate_state(1)[0])
        step_config = replace(config, seed=step_seed)
        t0 = time.perf_counter()
        joint, info = plan_step(belief, team, step_config, prefer or None,
                                avoid or None)
        plan_times.append(time.perf_counter() - t0)
        ap_times.append(info["ap_time"])
        root_value = info["root_value"]
        for act in joint.actions:
            if act.robot < n:
                last_targets[act.robot] = act.target
        out = advance(belief, joint, world, team)
        total += out.ugv_cost_delta
        for i in range(n):
            node = out.next_belief.ugv_poses[i].node
            if node is not None and node != last_node.get(i):
                if i in last_node:
                    came_from[i] = last_node[i]
                last_node[i] = node
        trace.append({
            "step": steps,
            "targets": list(joint.targets),
            "elapsed": out.elapsed,
            "cost_delta": out.ugv_cost_delta,
            "observations": [(o.pbp, int(o.status), o.observer)
                             for o in out.observations],
            "root_value": root_value,
        })
        belief = out.next_belief
        steps += 1
    return EpisodeResult(
        total_ugv_distance=total,
        num_decision_steps=steps,
        plan_times=plan_times,
        ap_times=ap_times,
        trace=trace,
        incomplete=not belief.all_done(),
        world_status=world.edge_status.copy(),
    )
