"""Minimal deterministic neural network kernel (numpy only)."""

from .gradcheck import grad_check_layer, grad_check_model
from .layers import (
    BN_EPS,
    BN_MOMENTUM,
    LAYER_KINDS,
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    Flatten,
    Layer,
    Linear,
    MaxPool1d,
    ReLU,
    Reshape1d,
)
from .losses import mse_loss, softmax, softmax_cross_entropy
from .network import (
    CONV_CHANNELS,
    EMBED_DIM,
    FLAT_FEATURES,
    HIDDEN_UNITS,
    INPUT_BINS,
    Model,
    build_autoencoder,
    build_classifier,
    complexity_report,
    init_weights,
    rebuild_layer,
)
from .optim import AdamConfig, adam_update

__all__ = [
    "AdamConfig",
    "BatchNorm1d",
    "BN_EPS",
    "BN_MOMENTUM",
    "build_autoencoder",
    "build_classifier",
    "complexity_report",
    "Conv1d",
    "ConvTranspose1d",
    "CONV_CHANNELS",
    "EMBED_DIM",
    "FLAT_FEATURES",
    "Flatten",
    "grad_check_layer",
    "grad_check_model",
    "HIDDEN_UNITS",
    "init_weights",
    "INPUT_BINS",
    "Layer",
    "LAYER_KINDS",
    "Linear",
    "MaxPool1d",
    "Model",
    "mse_loss",
    "adam_update",
    "rebuild_layer",
    "ReLU",
    "Reshape1d",
    "softmax",
    "softmax_cross_entropy",
]
