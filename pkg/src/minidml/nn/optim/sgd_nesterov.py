"""SGD with Nesterov momentum, in the look-ahead-free reformulation."""

import numpy as np

from .._util import arr, mat, same_shape


def init(X):
    return mat(np.zeros_like(arr(X)))


def update(X, dX, lr, mu, v):
    """Returns ``(X, v)``."""
    X, dX, v_prev = arr(X), arr(dX), arr(v)
    same_shape("sgd_nesterov update", X, dX)
    same_shape("sgd_nesterov velocity", X, v_prev)
    mu = float(mu)
    v = mu * v_prev - float(lr) * dX
    return mat(X - mu * v_prev + (1.0 + mu) * v), mat(v)
