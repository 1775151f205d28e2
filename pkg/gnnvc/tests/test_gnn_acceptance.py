"""End-to-end acceptance for the learned predictor.

Uses the shipped checkpoint (trained on the 2,100-instance NDJSON set
built with the planner package's dataset command; see models/README).
The planner side is exercised only through its public episode runner
and the stdio wire protocol.
"""
import copy
import random
import sys
from pathlib import Path

import pytest
import torch

from gnnvc import load_checkpoint, request_to_batch

from gnn_helpers import random_instance

MODELS = Path(__file__).resolve().parent.parent / "models"
CKPT = MODELS / "vc.ckpt"


@pytest.fixture(scope="module")
def model():
    assert CKPT.exists(), (
        f"missing trained checkpoint {CKPT}; rebuild with "
        "`scoutplan dataset ...` and `gnnvc train ...` per the README")
    return load_checkpoint(CKPT)


def _random_request(rng, req_id):
    inst = random_instance(rng, num_vertices=rng.randrange(6, 13))
    start = inst["robot"]["start"]
    pose = {"node": start}
    if rng.random() < 0.2:
        e = rng.randrange(len(inst["graph"]["edges"]))
        pose = {"edge": e, "offset": rng.random() * inst["graph"]["edges"][e]["length"]}
    return {"id": req_id, "graph": inst["graph"],
            "known": {"traversable": [], "blocked": []},
            "robot": {"start": pose, "goal": inst["robot"]["goal"]}}


def test_predictor_invariants_on_random_requests(model):
    rng = random.Random(77)
    for req_id in range(1000):
        req = _random_request(rng, req_id)
        batch = request_to_batch(req)
        pred = model.predict(batch)
        assert bool((pred >= 0.0).all())
        assert bool((pred[~batch.mask] == 0.0).all())
        flipped = copy.deepcopy(req)
        eid = req_id % len(flipped["graph"]["edges"])
        e = flipped["graph"]["edges"][eid]
        e["u"], e["v"] = e["v"], e["u"]
        # The offset of an on-edge pose is measured from endpoint u, so
        # mirroring the endpoints must mirror the offset to keep the
        # request's meaning unchanged.
        start = flipped["robot"]["start"]
        if start.get("edge") == eid:
            start["offset"] = e["length"] - start["offset"]
        pred_f = model.predict(request_to_batch(flipped))
        assert torch.allclose(pred, pred_f, atol=1e-4), f"request {req_id}"


def test_liap_tracks_oracle_backed_pruning():
    harness = pytest.importorskip("scoutplan.harness")
    assert CKPT.exists()
    spec = harness.ExperimentSpec(
        kinds=("bridges", "islands", "dense"),
        teams=((1, 1),),
        planners=("sap-iap", "sap-liap"),
        instances=6,
        rollouts=(1000,),
        top_k=(1,),
        oracle_samples=1000,
        seed=424242,
        predictor_command=(sys.executable, "-m", "gnnvc.cli",
                           "serve", "--model", str(CKPT)),
    )
    rows, episodes = harness.run_experiment(spec)
    by = {(r.env, r.planner): r for r in rows}
    for env in ("bridges", "islands", "dense"):
        iap = by[(env, "sap-iap")]
        liap = by[(env, "sap-liap")]
        assert iap.failures == 0 and liap.failures == 0
        assert liap.mean_distance <= 1.10 * iap.mean_distance, \
            f"{env}: liap {liap.mean_distance:.1f} vs iap {iap.mean_distance:.1f}"
        assert liap.mean_ap_time < 1.0
