"""Dense feedforward network engine."""
from .layers import (
    Activation,
    ActivationProfile,
    Layer,
    LayerSpec,
    TrainConfig,
    TrainResult,
    WeightSet,
    classifier_specs,
    layer_offsets,
    validate_specs,
)
from .model import (
    ForwardCache,
    LossKind,
    activation_matrix,
    backward,
    batch_loss,
    forward,
    forward_cache,
    gradient,
    init_weights,
    loss_and_gradient,
    predict,
    sgd_step,
)
from .serialization import decode, encode, load_weights, save_weights
from .training import fit, train

__all__ = [
    "Activation",
    "ActivationProfile",
    "Layer",
    "LayerSpec",
    "TrainConfig",
    "TrainResult",
    "WeightSet",
    "classifier_specs",
    "layer_offsets",
    "validate_specs",
    "ForwardCache",
    "LossKind",
    "activation_matrix",
    "backward",
    "batch_loss",
    "forward",
    "forward_cache",
    "gradient",
    "init_weights",
    "loss_and_gradient",
    "predict",
    "sgd_step",
    "encode",
    "decode",
    "save_weights",
    "load_weights",
    "fit",
    "train",
]
