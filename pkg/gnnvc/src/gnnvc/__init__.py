"""Learned per-edge value-change prediction for scout target scoring."""
from .data import DataError, GraphBatch, instance_to_batch, request_to_batch
from .model import (LENGTH_SCALE, ModelConfig, ValueChangeNet,
                    load_checkpoint, save_checkpoint, weighted_huber_loss)
from .serve import handle_request, serve, serve_stream
from .train import TrainError, TrainResult, train, uncertain_mae

__version__ = "0.1.0"

__all__ = [
    "DataError", "GraphBatch", "instance_to_batch", "request_to_batch",
    "LENGTH_SCALE", "ModelConfig", "ValueChangeNet", "load_checkpoint",
    "save_checkpoint", "weighted_huber_loss", "handle_request", "serve",
    "serve_stream", "TrainError", "TrainResult", "train", "uncertain_mae",
]
