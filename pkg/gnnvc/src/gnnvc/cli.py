"""Command-line entry points: train a checkpoint, serve predictions."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict

from .model import ModelConfig
from .serve import serve
from .train import TrainError, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnnvc",
        description="Per-edge value-change regressor: training and stdio serving")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model on an NDJSON dataset")
    p_train.add_argument("--data", required=True,
                         help="labeled instances, one JSON object per line")
    p_train.add_argument("--out", required=True, help="checkpoint path")
    p_train.add_argument("--latent-dim", type=int, default=64)
    p_train.add_argument("--layers", type=int, default=3)
    p_train.add_argument("--heads", type=int, default=4)
    p_train.add_argument("--epochs", type=int, default=40)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--batch-size", type=int, default=16)
    p_train.add_argument("--huber-delta", type=float, default=1.0)
    p_train.add_argument("--certain-weight", type=float, default=0.01)
    p_train.add_argument("--val-fraction", type=float, default=0.1)
    p_train.add_argument("--seed", type=int, default=0)

    p_serve = sub.add_parser("serve", help="answer NDJSON requests on stdio")
    p_serve.add_argument("--model", required=True, help="checkpoint path")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    if args.command == "train":
        config = ModelConfig(latent_dim=args.latent_dim,
                             num_layers=args.layers,
                             heads=args.heads,
                             huber_delta=args.huber_delta,
                             certain_weight=args.certain_weight,
                             lr=args.lr,
                             epochs=args.epochs,
                             batch_size=args.batch_size,
                             val_fraction=args.val_fraction,
                             seed=args.seed)
        try:
            _, result = train(args.data, config, out_path=args.out)
        except TrainError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(json.dumps({"checkpoint": args.out, **asdict(result)},
                         sort_keys=True))
        return 0
    serve(args.model)
    return 0


if __name__ == "__main__":
    sys.exit(main())
