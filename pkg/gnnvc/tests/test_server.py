import io
import json
import random
import time

import torch

from gnnvc import ModelConfig, ValueChangeNet, handle_request, serve_stream

from gnn_helpers import random_instance, tri_instance


def model():
    torch.manual_seed(0)
    net = ValueChangeNet(ModelConfig(latent_dim=32, heads=2))
    net.eval()
    return net


def as_request(inst, req_id=0):
    return {"id": req_id, "graph": inst["graph"],
            "known": {"traversable": [], "blocked": []},
            "robot": {"start": {"node": inst["robot"]["start"]},
                      "goal": inst["robot"]["goal"]}}


def run_lines(lines):
    out = io.StringIO()
    serve_stream(model(), stdin=io.StringIO("".join(lines)), stdout=out)
    return [json.loads(l) for l in out.getvalue().splitlines()]


def test_reply_covers_every_edge():
    req = as_request(tri_instance(), req_id=7)
    reply = handle_request(model(), req)
    assert reply["id"] == 7
    assert set(reply["vc"]) == {"0", "1", "2"}
    assert reply["vc"]["1"] == 0.0 and reply["vc"]["2"] == 0.0
    assert reply["vc"]["0"] >= 0.0


def test_known_lists_override_probabilities():
    inst = tri_instance()
    req = as_request(inst)
    # PBP node id 3 = num_vertices(3) + edge 0; observing it blocks edge 0.
    req["known"]["blocked"] = [3]
    reply = handle_request(model(), req)
    assert reply["vc"]["0"] == 0.0


def test_stream_replies_in_order_and_survives_garbage():
    reqs = [json.dumps(as_request(tri_instance(), i)) + "\n" for i in range(3)]
    replies = run_lines([reqs[0], "not json\n", reqs[1], "\n", reqs[2]])
    assert [r.get("id") for r in replies] == [0, None, 1, 2]
    assert "error" in replies[1]
    assert all("vc" in r for r in replies if r.get("id") is not None)


def test_duplicate_ids_each_answered():
    reqs = [json.dumps(as_request(tri_instance(), 5)) + "\n"] * 2
    replies = run_lines(reqs)
    assert [r["id"] for r in replies] == [5, 5]
    assert replies[0]["vc"] == replies[1]["vc"]


def test_goal_equals_start_is_answered():
    inst = tri_instance()
    req = as_request(inst)
    req["robot"]["goal"] = inst["robot"]["start"]
    reply = handle_request(model(), req)
    assert set(reply["vc"]) == {"0", "1", "2"}


def test_on_edge_and_pbp_start_poses():
    req = as_request(tri_instance())
    req["robot"]["start"] = {"edge": 0, "offset": 2.0}
    assert "vc" in handle_request(model(), req)
    req["robot"]["start"] = {"node": 3}  # the direct edge's midpoint node
    assert "vc" in handle_request(model(), req)


def test_malformed_request_reports_matching_id():
    req = {"id": 42, "graph": {"vertices": [], "edges": []}}  # no robot
    replies = run_lines([json.dumps(req) + "\n"])
    assert replies[0]["id"] == 42
    assert "error" in replies[0]


def test_median_latency_under_50ms():
    net = model()
    rng = random.Random(9)
    reqs = [as_request(random_instance(rng, num_vertices=16), i)
            for i in range(20)]
    for req in reqs[:3]:
        handle_request(net, req)  # warm up
    times = []
    for req in reqs:
        t0 = time.perf_counter()
        handle_request(net, req)
        times.append(time.perf_counter() - t0)
    times.sort()
    assert times[len(times) // 2] < 0.05
