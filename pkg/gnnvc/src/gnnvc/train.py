"""Training loop for the value-change regressor."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import torch

from .data import GraphBatch, instance_to_batch, read_instances
from .model import (ModelConfig, ValueChangeNet, save_checkpoint,
                    weighted_huber_loss)

log = logging.getLogger(__name__)


class TrainError(RuntimeError):
    pass


@dataclass
class TrainResult:
    train_instances: int
    val_instances: int
    val_mae: float           # held-out MAE on uncertain edges, meters
    final_train_loss: float


def _split(batches: list[GraphBatch], config: ModelConfig):
    gen = torch.Generator().manual_seed(config.seed)
    order = torch.randperm(len(batches), generator=gen).tolist()
    n_val = 0
    if config.val_fraction > 0.0 and len(batches) > 1:
        n_val = max(1, int(len(batches) * config.val_fraction))
    val_idx = set(order[:n_val])
    train = [batches[i] for i in order if i not in val_idx]
    val = [batches[i] for i in sorted(val_idx)]
    return train, val


def uncertain_mae(model: ValueChangeNet, batches: list[GraphBatch]) -> float:
    err = 0.0
    count = 0
    for b in batches:
        if not bool(b.mask.any()):
            continue
        pred = model.predict(b)
        err += float((pred[b.mask] - b.labels[b.mask]).abs().sum())
        count += int(b.mask.sum())
    return err / count if count else 0.0


def train(data_path, config: ModelConfig, out_path=None) -> tuple[ValueChangeNet, TrainResult]:
    batches = [instance_to_batch(inst) for inst in read_instances(data_path)]
    if not batches:
        raise TrainError(f"no instances in {data_path}")
    train_set, val_set = _split(batches, config)

    torch.manual_seed(config.seed)
    model = ValueChangeNet(config)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    gen = torch.Generator().manual_seed(config.seed + 1)

    last_loss = math.nan
    for epoch in range(config.epochs):
        model.train()
        order = torch.randperm(len(train_set), generator=gen).tolist()
        total = 0.0
        steps = 0
        for lo in range(0, len(order), config.batch_size):
            group = [train_set[i] for i in order[lo:lo + config.batch_size]]
            if not any(bool(b.mask.any()) for b in group):
                continue
            opt.zero_grad()
            loss = sum(weighted_huber_loss(model(b), b, config.huber_delta,
                                           config.certain_weight)
                       for b in group) / len(group)
            if not torch.isfinite(loss):
                raise TrainError(
                    f"non-finite loss at epoch {epoch}, step {steps}: {loss}")
            loss.backward()
            opt.step()
            total += float(loss.detach())
            steps += 1
        last_loss = total / steps if steps else math.nan
        if epoch % 5 == 0 or epoch == config.epochs - 1:
            log.info("epoch %d loss %.4f val MAE %.3f m",
                     epoch, last_loss, uncertain_mae(model, val_set))

    model.eval()
    result = TrainResult(train_instances=len(train_set),
                         val_instances=len(val_set),
                         val_mae=uncertain_mae(model, val_set),
                         final_train_loss=last_loss)
    if out_path is not None:
        save_checkpoint(out_path, model)
    return model, result
