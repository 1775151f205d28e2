"""Newline-delimited JSON prediction server over stdin/stdout.

One request per line; each reply echoes the request id.  Malformed
requests produce an error reply instead of killing the stream, so the
planner on the other side of the pipe can fall back gracefully.
"""
from __future__ import annotations

import json
import sys

import torch

from .data import request_to_batch
from .model import ValueChangeNet, load_checkpoint


def handle_request(model: ValueChangeNet, req: dict) -> dict:
    batch = request_to_batch(req)
    pred = model.predict(batch)
    # Server-side contract: nonnegative everywhere, exact zero when masked.
    assert bool((pred >= 0).all())
    assert bool((pred[~batch.mask] == 0).all())
    vc = {str(e): float(pred[e]) for e in range(batch.num_edges)}
    return {"id": req.get("id"), "vc": vc}


def serve_stream(model: ValueChangeNet, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    torch.set_num_threads(1)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        req_id = None
        try:
            req = json.loads(line)
            req_id = req.get("id") if isinstance(req, dict) else None
            reply = handle_request(model, req)
        except Exception as exc:  # malformed input must not end the stream
            reply = {"id": req_id, "error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(reply, sort_keys=True) + "\n")
        stdout.flush()


def serve(model_path, stdin=None, stdout=None) -> None:
    serve_stream(load_checkpoint(model_path), stdin, stdout)
