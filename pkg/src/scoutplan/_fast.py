"""Compiled kernels for the planner's hot loops.

Everything here works on the PBP-expanded CSR arrays owned by
``WorldGraph``.  Conventions: ``passable`` is a per-edge uint8 mask; a
PBP whose edge is impassable is a sink (arrivals allowed, departures
not), which keeps "walk up to the blockage and turn around" legal
without ever routing through it.
"""
from __future__ import annotations

import numpy as np
from numba import njit

INF = np.inf

# Edge status codes, mirroring scoutplan.graph.
_UNKNOWN = 0
_TRAVERSABLE = 1
_BLOCKED = 2


@njit(cache=True)
def _heap_push(heap_d, heap_n, size, d, n):
    i = size
    heap_d[i] = d
    heap_n[i] = n
    while i > 0:
        p = (i - 1) >> 1
        if heap_d[p] <= heap_d[i]:
            break
        heap_d[p], heap_d[i] = heap_d[i], heap_d[p]
        heap_n[p], heap_n[i] = heap_n[i], heap_n[p]
        i = p
    return size + 1


@njit(cache=True)
def _heap_pop(heap_d, heap_n, size):
    d = heap_d[0]
    n = heap_n[0]
    size -= 1
    heap_d[0] = heap_d[size]
    heap_n[0] = heap_n[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        r = l + 1
        c = l
        if r < size and heap_d[r] < heap_d[l]:
            c = r
        if heap_d[i] <= heap_d[c]:
            break
        heap_d[i], heap_d[c] = heap_d[c], heap_d[i]
        heap_n[i], heap_n[c] = heap_n[c], heap_n[i]
        i = c
    return d, n, size


@njit(cache=True)
def dijkstra(indptr, arc_to, arc_len, nv, passable,
             seed_nodes, seed_dists, dist, pred):
    """Multi-source Dijkstra; fills dist/pred in place."""
    n = dist.shape[0]
    for i in range(n):
        dist[i] = INF
        pred[i] = -1
    cap = 4 * indptr[n] + 8
    heap_d = np.empty(cap, dtype=np.float64)
    heap_n = np.empty(cap, dtype=np.int64)
    size = 0
    for k in range(seed_nodes.shape[0]):
        s = seed_nodes[k]
        if seed_dists[k] < dist[s]:
            dist[s] = seed_dists[k]
            size = _heap_push(heap_d, heap_n, size, seed_dists[k], s)
    while size > 0:
        d, s, size = _heap_pop(heap_d, heap_n, size)
        if d > dist[s]:
            continue
        if s >= nv and passable[s - nv] == 0:
            continue  # blocked PBP: sink
        for i in range(indptr[s], indptr[s + 1]):
            m = arc_to[i]
            nd = d + arc_len[i]
            if nd < dist[m] - 1e-12:
                dist[m] = nd
                pred[m] = s
                size = _heap_push(heap_d, heap_n, size, nd, m)
    return dist


@njit(cache=True)
def optimistic_nav_cost(indptr, arc_to, arc_len, nv, lengths,
                        know, world_blocked,
                        seed_nodes, seed_dists, seed_pbp_entry, goal, penalty):
    """Travel cost of optimistic replanning navigation to the goal.

    The robot repeatedly plans a shortest path treating unknown edges
    as passable, walks it, and reveals each unknown PBP it reaches from
    ``world_blocked``.  Hitting a blockage strands it at the PBP, from
    which it must back out through its entry node.  ``know`` is
    consumed (pass a copy).
    """
    n = indptr.shape[0] - 1
    dist = np.empty(n, dtype=np.float64)
    pred = np.empty(n, dtype=np.int64)
    passable = np.empty(know.shape[0], dtype=np.uint8)
    path = np.empty(n + 1, dtype=np.int64)
    sn = seed_nodes.copy()
    sd = seed_dists.copy()
    total = 0.0
    max_replans = know.shape[0] + 1
    for _ in range(max_replans):
        for e in range(know.shape[0]):
            passable[e] = 0 if know[e] == _BLOCKED else 1
        dijkstra(indptr, arc_to, arc_len, nv, passable, sn, sd, dist, pred)
        if not np.isfinite(dist[goal]):
            return total + penalty
        # Reconstruct goal -> anchor, then walk it forward.
        plen = 0
        node = goal
        while node >= 0:
            path[plen] = node
            plen += 1
            node = pred[node]
        anchor = path[plen - 1]
        for k in range(sn.shape[0]):
            if sn[k] == anchor:
                total += sd[k]
                break
        if anchor >= nv and know[anchor - nv] == _UNKNOWN:
            # Starting segment ends on an unobserved PBP: reveal it.
            e = anchor - nv
            if world_blocked[e]:
                know[e] = _BLOCKED
                sn = np.empty(1, dtype=np.int64)
                sd = np.empty(1, dtype=np.float64)
                sn[0] = seed_pbp_entry
                sd[0] = lengths[e] * 0.5
                continue
            know[e] = _TRAVERSABLE
        blocked_entry = -1
        blocked_edge = -1
        prev = anchor
        walked = dist[anchor]
        for idx in range(plen - 2, -1, -1):
            node = path[idx]
            total += dist[node] - walked
            walked = dist[node]
            if node >= nv:
                e = node - nv
                if know[e] == _UNKNOWN:
                    if world_blocked[e]:
                        know[e] = _BLOCKED
                        blocked_entry = prev  # entry side of the blockage
                        blocked_edge = e
                        break
                    know[e] = _TRAVERSABLE
            prev = node
        if blocked_edge >= 0:
            # Stranded at the PBP: only exit is back through the entry
            # node, at half the edge length.
            sn = np.empty(1, dtype=np.int64)
            sd = np.empty(1, dtype=np.float64)
            sn[0] = blocked_entry
            sd[0] = lengths[blocked_edge] * 0.5
            continue
        return total
    return total + penalty


@njit(cache=True)
def value_change_table(indptr, arc_to, arc_len, nv,
                       edge_u, edge_v, lengths, status,
                       uniforms, p_block,
                       seed_nodes, seed_dists, goal, penalty,
                       vc_out, se_out):
    """Monte Carlo value-change estimates for every unknown edge.

    One batch of sampled worlds is shared by all edges and both
    conditionings (common random numbers).  For each world two
    single-source Dijkstras (from the robot and from the goal) resolve
    most conditionings analytically; forcing a shortest-path edge to
    blocked triggers one extra Dijkstra.
    """
    ne = lengths.shape[0]
    M = uniforms.shape[0]
    n = indptr.shape[0] - 1
    dist_s = np.empty(n, dtype=np.float64)
    dist_g = np.empty(n, dtype=np.float64)
    dist_t = np.empty(n, dtype=np.float64)
    pred = np.empty(n, dtype=np.int64)
    passable = np.empty(ne, dtype=np.uint8)
    goal_seed_n = np.empty(1, dtype=np.int64)
    goal_seed_d = np.zeros(1, dtype=np.float64)
    goal_seed_n[0] = goal
    sums = np.zeros(ne, dtype=np.float64)
    sumsq = np.zeros(ne, dtype=np.float64)
    for m in range(M):
        for e in range(ne):
            if status[e] == _UNKNOWN:
                passable[e] = 0 if uniforms[m, e] < p_block[e] else 1
            else:
                passable[e] = 1 if status[e] == _TRAVERSABLE else 0
        dijkstra(indptr, arc_to, arc_len, nv, passable,
                 seed_nodes, seed_dists, dist_s, pred)
        dijkstra(indptr, arc_to, arc_len, nv, passable,
                 goal_seed_n, goal_seed_d, dist_g, pred)
        c = dist_s[goal]
        if c > penalty:
            c = penalty
        for e in range(ne):
            if status[e] != _UNKNOWN:
                continue
            u = edge_u[e]
            v = edge_v[e]
            via = dist_s[u] + lengths[e] + dist_g[v]
            via2 = dist_s[v] + lengths[e] + dist_g[u]
            if via2 < via:
                via = via2
            if passable[e] == 1:
                ct = c
                if via <= c + 1e-9:
                    # Edge may lie on a shortest path: recompute without it.
                    passable[e] = 0
                    dijkstra(indptr, arc_to, arc_len, nv, passable,
                             seed_nodes, seed_dists, dist_t, pred)
                    passable[e] = 1
                    cb = dist_t[goal]
                    if cb > penalty:
                        cb = penalty
                else:
                    cb = c
            else:
                cb = c
                ct = via if via < c else c
                if ct > penalty:
                    ct = penalty
            d = cb - ct
            sums[e] += d
            sumsq[e] += d * d
    for e in range(ne):
        if status[e] != _UNKNOWN:
            vc_out[e] = 0.0
            se_out[e] = 0.0
            continue
        mean = sums[e] / M
        var = sumsq[e] / M - mean * mean
        if var < 0.0:
            var = 0.0
        vc_out[e] = mean if mean > 0.0 else 0.0
        se_out[e] = np.sqrt(var / M)
