"""Layer functions, one module per layer, each with ``forward`` and ``backward``
(and ``init`` where the layer has parameters)."""

from . import affine, conv2d, cross_entropy_loss, dropout, max_pool2d, relu, sigmoid, softmax, tanh

__all__ = ["affine", "conv2d", "cross_entropy_loss", "dropout", "max_pool2d", "relu",
           "sigmoid", "softmax", "tanh"]
