"""Edge-level value-change regressor.

Three stages: linear input encoders, a stack of attention-based message
passing layers with edge-conditioned scores, and a symmetric per-edge
decoder.  Every directed view of an edge is constructed internally, so
predictions do not depend on the stored (u, v) endpoint order, and a
Softplus head keeps outputs nonnegative.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import GraphBatch

# Raw meter-scale inputs make early attention scores blow up; lengths
# are divided by this before encoding.  Labels stay in meters.
LENGTH_SCALE = 100.0


@dataclass
class ModelConfig:
    latent_dim: int = 64
    num_layers: int = 3
    heads: int = 4
    huber_delta: float = 1.0
    certain_weight: float = 0.01
    lr: float = 1e-3
    epochs: int = 40
    batch_size: int = 16
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.certain_weight < 1.0:
            raise ValueError("certain_weight must be in (0, 1)")
        if self.huber_delta <= 0.0:
            raise ValueError("huber_delta must be positive")
        if self.latent_dim % self.heads != 0:
            raise ValueError("latent_dim must be divisible by heads")


def _segment_softmax(score: torch.Tensor, index: torch.Tensor,
                     num_segments: int) -> torch.Tensor:
    # score: [E, H], index: [E]; softmax within each target segment.
    idx = index.unsqueeze(1).expand_as(score)
    seg_max = torch.full((num_segments, score.shape[1]), -torch.inf,
                         dtype=score.dtype)
    seg_max = seg_max.scatter_reduce(0, idx, score, reduce="amax",
                                     include_self=True)
    score = (score - seg_max[index]).exp()
    denom = torch.zeros(num_segments, score.shape[1], dtype=score.dtype)
    denom = denom.index_add(0, index, score)
    return score / (denom[index] + 1e-16)


class AttentionLayer(nn.Module):
    """One message-passing step with edge-conditioned attention."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.w_src = nn.Linear(dim, dim)
        self.w_dst = nn.Linear(dim, dim)
        self.w_edge = nn.Linear(dim, dim)
        self.attn = nn.Parameter(torch.empty(heads, self.head_dim))
        nn.init.xavier_uniform_(self.attn)
        self.proj = nn.Linear(dim, dim)
        self.node_norm = nn.LayerNorm(dim)
        self.edge_mlp = nn.Sequential(nn.Linear(3 * dim, dim), nn.ReLU(),
                                      nn.Linear(dim, dim))
        self.edge_norm = nn.LayerNorm(dim)

    def forward(self, h, g, src, dst, eid):
        n = h.shape[0]
        msg_src = self.w_src(h)
        z = (msg_src[src] + self.w_dst(h)[dst] + self.w_edge(g)[eid])
        z = z.view(-1, self.heads, self.head_dim)
        score = (F.leaky_relu(z, 0.2) * self.attn).sum(-1)
        alpha = _segment_softmax(score, dst, n)
        msg = alpha.unsqueeze(-1) * msg_src[src].view(-1, self.heads,
                                                      self.head_dim)
        agg = torch.zeros(n, self.heads, self.head_dim, dtype=h.dtype)
        agg = agg.index_add(0, dst, msg)
        h = self.node_norm(h + self.proj(agg.reshape(n, -1)))

        u, v = src[: g.shape[0]], dst[: g.shape[0]]
        fwd = self.edge_mlp(torch.cat([h[u], h[v], g], dim=-1))
        rev = self.edge_mlp(torch.cat([h[v], h[u], g], dim=-1))
        g = self.edge_norm(g + 0.5 * (fwd + rev))
        return h, g


class ValueChangeNet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.latent_dim
        self.node_enc = nn.Sequential(nn.Linear(2, d), nn.ReLU())
        self.edge_enc = nn.Sequential(nn.Linear(2, d), nn.ReLU())
        self.layers = nn.ModuleList(
            AttentionLayer(d, config.heads) for _ in range(config.num_layers))
        self.decoder = nn.Sequential(nn.Linear(3 * d, d), nn.ReLU(),
                                     nn.Linear(d, 1))

    def forward(self, batch: GraphBatch) -> torch.Tensor:
        """Raw nonnegative prediction per edge, before mask zeroing."""
        h = self.node_enc(batch.node_x)
        ex = batch.edge_x.clone()
        ex[:, 0] = ex[:, 0] / LENGTH_SCALE
        g = self.edge_enc(ex)
        u, v = batch.edge_index
        # Both directed views of every edge share the undirected embedding.
        src = torch.cat([u, v])
        dst = torch.cat([v, u])
        eid = torch.arange(batch.num_edges).repeat(2)
        for layer in self.layers:
            h, g = layer(h, g, src, dst, eid)
        fwd = self.decoder(torch.cat([h[u], h[v], g], dim=-1))
        rev = self.decoder(torch.cat([h[v], h[u], g], dim=-1))
        return F.softplus(0.5 * (fwd + rev)).squeeze(-1)

    def predict(self, batch: GraphBatch) -> torch.Tensor:
        """Inference output with deterministic edges forced to zero."""
        with torch.no_grad():
            out = self.forward(batch)
        return out * batch.mask.to(out.dtype)


def weighted_huber_loss(pred: torch.Tensor, batch: GraphBatch,
                        delta: float, certain_weight: float) -> torch.Tensor:
    """Per-edge Huber loss, down-weighted on deterministic edges."""
    resid = F.huber_loss(pred, batch.labels, delta=delta, reduction="none")
    weights = torch.where(batch.mask, 1.0, certain_weight)
    return (weights * resid).sum() / weights.sum()


def save_checkpoint(path, model: ValueChangeNet) -> None:
    torch.save({"config": asdict(model.config),
                "state_dict": model.state_dict()}, path)


def load_checkpoint(path) -> ValueChangeNet:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    model = ValueChangeNet(ModelConfig(**blob["config"]))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model
