"""Stateful layer objects over the functional layer library.

Each layer caches what its backward pass needs during ``forward`` and stores
parameter gradients in ``grads`` during ``backward``. ``Sequential`` chains
them; it is the Python-side counterpart of the scripts the translator emits
and doubles as the reference model for gradient checks.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..matrix import Matrix
from .layers import affine, conv2d, cross_entropy_loss, dropout, max_pool2d, relu, sigmoid, softmax, tanh


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, Matrix] = {}
        self.grads: dict[str, Matrix] = {}
        self._cache = None

    def forward(self, x: Matrix, training: bool = True) -> Matrix:
        raise NotImplementedError

    def backward(self, dout: Matrix) -> Matrix:
        raise NotImplementedError


class Affine(Layer):
    kind = "affine"

    def __init__(self, d_in: int, d_out: int, rng=None):
        super().__init__()
        self.params["W"], self.params["b"] = affine.init(d_in, d_out, rng=rng)

    def forward(self, x, training=True):
        self._cache = x
        return affine.forward(x, self.params["W"], self.params["b"])

    def backward(self, dout):
        dx, self.grads["W"], self.grads["b"] = affine.backward(
            dout, self._cache, self.params["W"], self.params["b"])
        return dx


class Conv2D(Layer):
    kind = "conv2d"

    def __init__(self, c, h, w, filters, kernel, stride=(1, 1), pad=(0, 0), rng=None):
        super().__init__()
        self.geom = (c, h, w, kernel[0], kernel[1], stride[0], stride[1], pad[0], pad[1])
        self.params["W"], self.params["b"] = conv2d.init(filters, c, kernel[0], kernel[1], rng=rng)

    def forward(self, x, training=True):
        c, h, w, r, s, sh, sw, ph, pw = self.geom
        out, hout, wout = conv2d.forward(x, self.params["W"], self.params["b"], c, h, w, r, s, sh, sw, ph, pw)
        self._cache = (x, hout, wout)
        return out

    def backward(self, dout):
        x, hout, wout = self._cache
        c, h, w, r, s, sh, sw, ph, pw = self.geom
        dx, self.grads["W"], self.grads["b"] = conv2d.backward(
            dout, hout, wout, x, self.params["W"], self.params["b"], c, h, w, r, s, sh, sw, ph, pw)
        return dx


class MaxPool2D(Layer):
    kind = "maxpool"

    def __init__(self, c, h, w, window, stride=(1, 1), pad=(0, 0)):
        super().__init__()
        self.geom = (c, h, w, window[0], window[1], stride[0], stride[1], pad[0], pad[1])

    def forward(self, x, training=True):
        out, hout, wout = max_pool2d.forward(x, *self.geom)
        self._cache = (x, hout, wout)
        return out

    def backward(self, dout):
        x, hout, wout = self._cache
        return max_pool2d.backward(dout, hout, wout, x, *self.geom)


class _Elementwise(Layer):
    module = None

    def forward(self, x, training=True):
        self._cache = x
        return self.module.forward(x)

    def backward(self, dout):
        return self.module.backward(dout, self._cache)


class ReLU(_Elementwise):
    kind = "relu"
    module = relu


class Sigmoid(_Elementwise):
    kind = "sigmoid"
    module = sigmoid


class Tanh(_Elementwise):
    kind = "tanh"
    module = tanh


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x, training=True):
        self._cache = x
        return softmax.forward(x)

    def backward(self, dout):
        return softmax.backward(dout, self._cache)


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, keep_p: float, seed: int = 0):
        super().__init__()
        self.keep_p = float(keep_p)
        self.seed = int(seed)

    def forward(self, x, training=True):
        if not training:
            self._cache = None
            return x
        out, self._cache = dropout.forward(x, self.keep_p, self.seed)
        return out

    def backward(self, dout):
        if self._cache is None:
            return dout
        return dropout.backward(dout, self._cache, self.keep_p)


class Sequential:
    def __init__(self, layers: Sequence[Layer], names: Sequence[tuple[str, str] | None] | None = None):
        self.layers = list(layers)
        # optional (weight name, bias name) per layer, used to expose flat parameter dicts
        self.names = list(names) if names is not None else [None] * len(self.layers)

    def forward(self, x, training=True) -> Matrix:
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def loss(self, probs, y) -> float:
        return cross_entropy_loss.forward(probs, y)

    def backward_from_loss(self, probs, y) -> Matrix:
        d = cross_entropy_loss.backward(probs, y)
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d

    def _flat(self, attr):
        out = {}
        for layer, names in zip(self.layers, self.names):
            if not layer.params:
                continue
            wname, bname = names if names else (f"{layer.kind}{id(layer)}_W", f"{layer.kind}{id(layer)}_b")
            d = getattr(layer, attr)
            if "W" in d:
                out[wname] = d["W"]
                out[bname] = d["b"]
        return out

    @property
    def params(self) -> dict[str, Matrix]:
        return self._flat("params")

    @property
    def grads(self) -> dict[str, Matrix]:
        return self._flat("grads")

    def set_params(self, weights) -> None:
        for layer, names in zip(self.layers, self.names):
            if layer.params and names:
                layer.params["W"] = weights[names[0]]
                layer.params["b"] = weights[names[1]]

    def predict(self, x) -> np.ndarray:
        return self.forward(x, training=False).to_numpy()
