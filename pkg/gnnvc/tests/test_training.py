import json
import math
import random

import pytest

from gnnvc import ModelConfig, TrainError, train
from gnnvc.train import uncertain_mae
from gnnvc.data import instance_to_batch

from gnn_helpers import random_instance, tri_instance


def write_ndjson(path, instances):
    with open(path, "w") as fh:
        for inst in instances:
            fh.write(json.dumps(inst) + "\n")


def test_overfits_small_set(tmp_path):
    rng = random.Random(1)
    instances = [random_instance(rng) for _ in range(10)]
    data = tmp_path / "d.ndjson"
    write_ndjson(data, instances)
    # No held-out split: this checks pure memorization capacity.
    cfg = ModelConfig(latent_dim=32, heads=2, epochs=600, lr=3e-3,
                      batch_size=10, val_fraction=0.0, seed=0)
    model, result = train(data, cfg)
    batches = [instance_to_batch(i) for i in instances]
    labels = [float(lab) for b in batches
              for lab, m in zip(b.labels, b.mask) if m]
    mean_label = sum(labels) / len(labels)
    assert uncertain_mae(model, batches) < 0.05 * mean_label
    assert math.isfinite(result.final_train_loss)


def test_checkpoint_written(tmp_path):
    rng = random.Random(2)
    data = tmp_path / "d.ndjson"
    write_ndjson(data, [random_instance(rng) for _ in range(4)])
    out = tmp_path / "m.ckpt"
    _, result = train(data, ModelConfig(latent_dim=16, heads=2, epochs=2),
                      out_path=out)
    assert out.exists()
    assert result.train_instances + result.val_instances == 4


def test_non_finite_loss_aborts(tmp_path):
    inst = tri_instance()
    inst["labels"][0] = float("inf")
    data = tmp_path / "d.ndjson"
    # Enough poisoned copies that the train split must contain one.
    write_ndjson(data, [inst] * 5 + [tri_instance()])
    with pytest.raises(TrainError, match="non-finite"):
        train(data, ModelConfig(latent_dim=16, heads=2, epochs=1, batch_size=6))


def test_all_certain_batches_are_skipped(tmp_path):
    inst = tri_instance()
    for e in inst["graph"]["edges"]:
        e["p_block"] = 0.0
    inst["edge_features"] = [[f[0], 0.0] for f in inst["edge_features"]]
    inst["mask"] = [False, False, False]
    inst["labels"] = [0.0, 0.0, 0.0]
    data = tmp_path / "d.ndjson"
    write_ndjson(data, [inst, inst])
    model, result = train(data, ModelConfig(latent_dim=16, heads=2, epochs=3))
    assert math.isnan(result.final_train_loss)  # every batch skipped
    assert result.val_mae == 0.0


def test_empty_dataset_is_an_error(tmp_path):
    data = tmp_path / "d.ndjson"
    data.write_text("")
    with pytest.raises(TrainError):
        train(data, ModelConfig())
