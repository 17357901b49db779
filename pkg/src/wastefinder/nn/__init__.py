"""Minimal neural-network engine: layers, Glorot init, Adam, backprop, training loop."""

from wastefinder.nn.network import (
    BatchNorm,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    MaxPool,
    Network,
    Relu,
    ShapeCompositionError,
    Sigmoid,
    build_network,
    forward,
)
from wastefinder.nn.train import NonFiniteLossError, TrainConfig, train
from wastefinder.nn.gradcheck import gradient_check
from wastefinder.nn.weights_io import load_network, save_network

__all__ = [
    "BatchNorm",
    "Conv2d",
    "Dense",
    "Dropout",
    "Flatten",
    "MaxPool",
    "Network",
    "NonFiniteLossError",
    "Relu",
    "ShapeCompositionError",
    "Sigmoid",
    "TrainConfig",
    "build_network",
    "forward",
    "gradient_check",
    "load_network",
    "save_network",
    "train",
]
