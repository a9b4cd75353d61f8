"""Learned envelope interpolator: model, training, and persistence."""

from .model import (
    EncoderConfig,
    ModelParams,
    attention_forward,
    batch_loss,
    expected_shapes,
    init_model,
    loss_and_gradients,
    model_forward,
)
from .training import (
    AdamState,
    LearnedInterpolator,
    TrainConfig,
    TrainingPair,
    adam_update,
    encode_window,
    gradient_check,
    predict_envelope,
    train,
)
from .weights_io import load_weights, save_weights

__all__ = [
    "AdamState",
    "EncoderConfig",
    "LearnedInterpolator",
    "ModelParams",
    "TrainConfig",
    "TrainingPair",
    "adam_update",
    "attention_forward",
    "batch_loss",
    "encode_window",
    "expected_shapes",
    "gradient_check",
    "init_model",
    "load_weights",
    "loss_and_gradients",
    "model_forward",
    "predict_envelope",
    "save_weights",
    "train",
]
