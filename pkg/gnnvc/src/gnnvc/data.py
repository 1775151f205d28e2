"""Tensor encoding of training instances and inference requests.

The on-disk contract is newline-delimited JSON produced by the planner
side: one labeled instance per line with `graph`, `robot`,
`node_features`, `edge_features`, `labels`, and `mask` fields.  At
inference time the same graph schema arrives over the wire with
observed edges re-encoded as p_block in {0, 1}.
"""
from __future__ import annotations

import gzip
import json
from dataclasses import dataclass
from typing import Iterator

import torch


class DataError(ValueError):
    pass


@dataclass
class GraphBatch:
    """One graph's tensors; the model consumes graphs individually."""

    node_x: torch.Tensor      # [V, 2] start/goal indicator
    edge_x: torch.Tensor      # [E, 2] length (meters), blocking probability
    edge_index: torch.Tensor  # [2, E] undirected endpoints (u, v)
    labels: torch.Tensor      # [E] value change, meters
    mask: torch.Tensor        # [E] bool, true iff p in (0, 1)

    @property
    def num_nodes(self) -> int:
        return self.node_x.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_x.shape[0]


def _open(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rt")
    return open(path)


def read_instances(path) -> Iterator[dict]:
    with _open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def instance_to_batch(inst: dict) -> GraphBatch:
    graph = inst["graph"]
    edges = sorted(graph["edges"], key=lambda e: e["id"])
    if [e["id"] for e in edges] != list(range(len(edges))):
        raise DataError("edge ids must be dense and 0-based")
    num_vertices = len(graph["vertices"])
    edge_index = torch.tensor([[e["u"] for e in edges],
                               [e["v"] for e in edges]], dtype=torch.long)
    if edge_index.numel() and int(edge_index.max()) >= num_vertices:
        raise DataError("edge endpoint out of vertex range")
    node_x = torch.tensor(inst["node_features"], dtype=torch.float32)
    if node_x.shape != (num_vertices, 2):
        raise DataError("node features must be one 2-vector per vertex")
    edge_x = torch.tensor(inst["edge_features"], dtype=torch.float32)
    labels = torch.tensor(inst.get("labels", [0.0] * len(edges)),
                          dtype=torch.float32)
    mask = torch.tensor(inst.get("mask",
                                 [0.0 < e["p_block"] < 1.0 for e in edges]),
                        dtype=torch.bool)
    if not (edge_x.shape[0] == labels.shape[0] == mask.shape[0] == len(edges)):
        raise DataError("edge arrays must cover every edge exactly once")
    return GraphBatch(node_x, edge_x, edge_index, labels, mask)


def request_to_batch(req: dict) -> GraphBatch:
    """Encode one wire request as an unlabeled graph batch.

    Observed edges arrive with p_block already forced to 0 or 1; the
    `known` PBP lists are applied again as a belt-and-braces measure so
    a permissive client cannot desynchronize the mask.
    """
    graph = req["graph"]
    edges = sorted(graph["edges"], key=lambda e: e["id"])
    num_vertices = len(graph["vertices"])
    known = req.get("known", {})
    # PBP node ids are num_vertices + edge_id by the shared convention.
    for pbp in known.get("traversable", []):
        edges[int(pbp) - num_vertices]["p_block"] = 0.0
    for pbp in known.get("blocked", []):
        edges[int(pbp) - num_vertices]["p_block"] = 1.0

    robot = req["robot"]
    start = _start_vertex(robot["start"], edges, num_vertices)
    goal = int(robot["goal"])
    node_features = [[1, 0] if u == start else [0, 1] if u == goal else [0, 0]
                     for u in range(num_vertices)]
    inst = {
        "graph": {"vertices": graph["vertices"], "edges": edges},
        "node_features": node_features,
        "edge_features": [[float(e["length"]), float(e["p_block"])]
                          for e in edges],
    }
    return instance_to_batch(inst)


def _start_vertex(pose: dict, edges: list[dict], num_vertices: int) -> int:
    """Collapse an on-edge or at-PBP pose to a nearby vertex."""
    if "node" in pose:
        node = int(pose["node"])
        if node < num_vertices:
            return node
        # A PBP node id encodes the midpoint of edge (id - num_vertices).
        return int(edges[node - num_vertices]["u"])
    e = edges[int(pose["edge"])]
    return int(e["u"]) if float(pose["offset"]) <= e["length"] / 2 else int(e["v"])
