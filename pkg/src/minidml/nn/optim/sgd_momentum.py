"""SGD with classical momentum: ``v = mu*v - lr*g; X = X + v``."""

import numpy as np

from .._util import arr, mat, same_shape


def init(X):
    return mat(np.zeros_like(arr(X)))


def update(X, dX, lr, mu, v):
    """Returns ``(X, v)``."""
    X, dX, v = arr(X), arr(dX), arr(v)
    same_shape("sgd_momentum update", X, dX)
    same_shape("sgd_momentum velocity", X, v)
    v = float(mu) * v - float(lr) * dX
    return mat(X + v), mat(v)
