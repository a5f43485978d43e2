"""Neural-network library: layer functions, optimizers and stateful wrappers."""

from . import layers, optim
from .network import (Affine, Conv2D, Dropout, Layer, MaxPool2D, ReLU, Sequential, Sigmoid,
                      Softmax, Tanh)

__all__ = ["layers", "optim", "Layer", "Affine", "Conv2D", "MaxPool2D", "ReLU", "Sigmoid",
           "Tanh", "Softmax", "Dropout", "Sequential"]
