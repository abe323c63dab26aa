"""Toy volumetric segmentation network: conv encoder, linear
self-attention bottleneck, conv decoder, with training and
sliding-window inference."""

from .attention import dense_attention_oracle, linear_attention
from .config import NetworkConfig, parameter_count, parameter_shapes
from .infer import predict_scores, sliding_window_infer
from .network import Weights, backward, forward, forward_with_cache, init_weights
from .preprocess import zscore_normalize
from .train import (
    TrainSample,
    loss_and_grads,
    loss_and_score_grad,
    make_sample,
    sgd_update,
    train,
    train_step,
)
from .weights_io import (
    load_weights,
    save_loss_curve,
    save_weights,
    weights_from_bytes,
    weights_to_bytes,
)

__all__ = [
    "NetworkConfig",
    "TrainSample",
    "Weights",
    "backward",
    "dense_attention_oracle",
    "forward",
    "forward_with_cache",
    "init_weights",
    "linear_attention",
    "load_weights",
    "loss_and_grads",
    "loss_and_score_grad",
    "make_sample",
    "parameter_count",
    "parameter_shapes",
    "predict_scores",
    "save_loss_curve",
    "save_weights",
    "sgd_update",
    "sliding_window_infer",
    "train",
    "train_step",
    "weights_from_bytes",
    "weights_to_bytes",
    "zscore_normalize",
]
